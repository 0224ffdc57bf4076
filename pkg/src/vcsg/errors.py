class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ValueError):
    """A problem, schedule or bench configuration is invalid."""


class DivergenceError(RuntimeError):
    """An optimizer iterate became non-finite or unbounded.

    The partial trace recorded up to the failure is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace

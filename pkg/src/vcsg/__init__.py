"""Variance-controlled batching SVRG for finite-sum non-convex problems."""
from .errors import ConfigError, DivergenceError, DomainError
from .estimators import EstimatorKind
from .oracle import IfoCounter, ProblemSpec, make_problem
from .optimizers import ALGORITHMS, RunConfig, RunResult, RunTrace, run
from .schedules import ScheduleConfig

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "EstimatorKind",
    "IfoCounter",
    "ProblemSpec",
    "RunConfig",
    "RunResult",
    "RunTrace",
    "ScheduleConfig",
    "make_problem",
    "run",
]

"""Inner-loop direction estimators of the batching SVRG family.

Each takes the current mini-batch gradient ``gk``, the same mini-batch's
gradient at the epoch anchor ``g0`` and the anchor batch gradient ``gj``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

LAMBDA_UNBIASED_STAR = (15.0 - math.sqrt(97.0)) / 16.0
LAMBDA_BIASED_STAR = 5.0 / 8.0

PLAIN = "plain"
WEIGHTED_UNBIASED = "weighted_unbiased"
BIASED = "biased"


def _check(gk, g0, gj):
    gk, g0, gj = (np.asarray(v, dtype=float) for v in (gk, g0, gj))
    if not gk.shape == g0.shape == gj.shape:
        raise DomainError(f"dimension mismatch: {gk.shape}, {g0.shape}, {gj.shape}")
    return gk, g0, gj


def _check_lambda(lam):
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")


def combine(kind, lam, gk, g0, gj):
    """Unchecked direction formula shared by the public estimators."""
    if kind == PLAIN:
        return gk - g0 + gj
    if kind == WEIGHTED_UNBIASED:
        return (1.0 - lam) * gk - lam * (g0 - gj)
    return (1.0 - lam) * (gk - g0) + lam * gj


def estimate_plain(gk, g0, gj):
    """Classical SVRG direction ``gk - g0 + gj``."""
    return combine(PLAIN, None, *_check(gk, g0, gj))


def estimate_weighted_unbiased(lam, gk, g0, gj):
    """``(1 - lam) gk - lam (g0 - gj)``."""
    _check_lambda(lam)
    return combine(WEIGHTED_UNBIASED, lam, *_check(gk, g0, gj))


def estimate_biased(lam, gk, g0, gj):
    """``(1 - lam) (gk - g0) + lam gj``."""
    _check_lambda(lam)
    return combine(BIASED, lam, *_check(gk, g0, gj))


@dataclass(frozen=True)
class EstimatorKind:
    """Tagged estimator choice; serializes as ``plain``, ``weighted_unbiased:<lam>``
    or ``biased:<lam>``."""

    kind: str = PLAIN
    lam: float | None = None

    def __post_init__(self):
        if self.kind == PLAIN:
            if self.lam is not None:
                raise DomainError("plain estimator takes no lambda")
        elif self.kind in (WEIGHTED_UNBIASED, BIASED):
            if self.lam is None:
                raise DomainError(f"{self.kind} estimator needs lambda")
            _check_lambda(self.lam)
        else:
            raise DomainError(f"unknown estimator kind {self.kind!r}")

    @classmethod
    def plain(cls):
        return cls(PLAIN)

    @classmethod
    def weighted_unbiased(cls, lam):
        return cls(WEIGHTED_UNBIASED, float(lam))

    @classmethod
    def biased(cls, lam):
        return cls(BIASED, float(lam))

    @classmethod
    def parse(cls, text):
        kind, _, lam = str(text).partition(":")
        try:
            if kind == PLAIN and not lam:
                return cls.plain()
            return cls(kind, float(lam) if lam else None)
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"bad estimator {text!r}: {exc}") from None

    def __str__(self):
        return self.kind if self.kind == PLAIN else f"{self.kind}:{self.lam!r}"

    @property
    def weight(self):
        """lambda, with the plain estimator reported as NaN."""
        return float("nan") if self.lam is None else self.lam

    def __call__(self, gk, g0, gj):
        if self.kind == PLAIN:
            return estimate_plain(gk, g0, gj)
        if self.kind == WEIGHTED_UNBIASED:
            return estimate_weighted_unbiased(self.lam, gk, g0, gj)
        return estimate_biased(self.lam, gk, g0, gj)

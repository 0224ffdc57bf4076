"""Per-epoch hyperparameters for VCSG: batch size, mini-batch, step, lambda.

The batch size is the smaller of an accuracy-driven term ``c_B S*/eps`` and a
sample-driven term ``n S* / (S* + 0.14 sqrt(n) sigma rho^(2j))``. Which term
wins decides the regime of the epoch:

* ``eps``: ``b = ceil(B^(1/4))``, ``eta = 1/(3L)``, weighted unbiased estimator
  switching between ``(15 - sqrt(97))/16`` and ``1/2`` at each inner step;
* ``n``: ``b = 1``, ``eta = B^(-1/2)/(3L)``, biased estimator with ``5/8``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .estimators import LAMBDA_BIASED_STAR, LAMBDA_UNBIASED_STAR, EstimatorKind

MIN_BATCH = 3
SAMPLE_TERM_COEF = 0.14

EPS_REGIME = "eps"
N_REGIME = "n"
INIT_REGIME = "init"


@dataclass(frozen=True)
class ScheduleConfig:
    epsilon: float = 1e-3
    sigma: float = 1.0
    rho: float = 0.9
    gamma: float = 1.0 / 3.0
    L: float = 1.0
    alpha: float = 0.0
    beta: float = 0.25
    n: int = 1000
    T: int = 100
    c_B: float = 1.0
    s_star_smoothing: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if not 0 < self.rho < 1:
            raise ConfigError("rho must lie in (0, 1)")
        if not 0 <= self.gamma <= 1.0 / 3.0:
            raise ConfigError("gamma must be ≤ 1/3")
        if not self.L > 0:
            raise ConfigError("L must be positive")
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ConfigError("alpha and beta must lie in [0, 1]")
        if self.n < 1 or self.T < 1:
            raise ConfigError("n and T must be positive")
        if not self.c_B > 0:
            raise ConfigError("c_B must be positive")
        if not 0 <= self.s_star_smoothing < 1:
            raise ConfigError("s_star_smoothing must lie in [0, 1)")


@dataclass(frozen=True)
class EpochDecision:
    regime: str
    B: int
    b: int
    eta: float
    lam: float
    estimator: EstimatorKind
    # eps regime: choose between lambda* and 1/2 per inner step
    switching: bool = False


def round_half_up(x):
    return int(math.floor(x + 0.5))


def ceil_fourth_root(B):
    """Smallest integer ``r`` with ``r^4 >= B``."""
    r = max(1, round(B**0.25))
    while r**4 < B:
        r += 1
    while r > 1 and (r - 1) ** 4 >= B:
        r -= 1
    return r


def batch_terms(j, s_star, cfg):
    """Return ``(accuracy_term, sample_term)`` before rounding."""
    term_eps = cfg.c_B * s_star / cfg.epsilon
    decay = SAMPLE_TERM_COEF * math.sqrt(cfg.n) * cfg.sigma * cfg.rho ** (2 * j)
    term_n = cfg.n * s_star / (s_star + decay)
    return term_eps, term_n


def batch_size(j, s_star, cfg):
    """Batch size ``B_j`` and its regime tag for epoch ``j`` given ``S*``."""
    if j < 1:
        raise DomainError("epoch index starts at 1")
    if s_star < 0 or not math.isfinite(s_star):
        raise DomainError("S* must be finite and non-negative")
    lo = min(MIN_BATCH, cfg.n)
    if s_star == 0:
        return lo, N_REGIME
    term_eps, term_n = batch_terms(j, s_star, cfg)
    regime = EPS_REGIME if term_eps <= term_n else N_REGIME
    B = min(max(round_half_up(min(term_eps, term_n)), lo), cfg.n)
    return B, regime


def resolve_epoch(j, s_star, cfg):
    B, regime = batch_size(j, s_star, cfg)
    if regime == EPS_REGIME:
        lam = LAMBDA_UNBIASED_STAR
        return EpochDecision(EPS_REGIME, B, ceil_fourth_root(B), 1.0 / (3.0 * cfg.L),
                             lam, EstimatorKind.weighted_unbiased(lam), switching=True)
    lam = LAMBDA_BIASED_STAR
    return EpochDecision(N_REGIME, B, 1, 1.0 / (3.0 * cfg.L * math.sqrt(B)),
                         lam, EstimatorKind.biased(lam))


def initial_epoch(cfg):
    """First epoch: full batch, ``b = ceil(n^(1/4))``, ``eta = 1/(3 L sqrt(n))``, biased 5/8."""
    n = cfg.n
    lam = LAMBDA_BIASED_STAR
    return EpochDecision(INIT_REGIME, n, min(ceil_fourth_root(n), n),
                         1.0 / (3.0 * cfg.L * math.sqrt(n)), lam, EstimatorKind.biased(lam))


def estimate_s_star(components, g_j, previous=None):
    """Within-batch variance ``mean_i ||grad f_i - g_j||^2`` of the anchor batch.

    ``components`` are the anchor-batch gradient rows already computed for
    ``g_j``, so the estimate costs no IFO. A single-row batch has no variance
    estimate and returns ``previous``.
    """
    G = np.asarray(components, dtype=float)
    if G.shape[0] < 2:
        if previous is None:
            raise DomainError("variance of a single component is undefined")
        return previous
    dev = G - np.asarray(g_j, dtype=float)
    return float(np.einsum("ij,ij->", dev, dev) / G.shape[0])


class VarianceEstimate:
    """Running S*, exponentially smoothed across epochs."""

    def __init__(self, smoothing=0.5, value=None):
        self.smoothing = float(smoothing)
        self.value = value

    def update(self, sample):
        if sample < 0:
            raise DomainError("variance sample must be non-negative")
        if self.value is None:
            self.value = float(sample)
        else:
            self.value = self.smoothing * self.value + (1.0 - self.smoothing) * float(sample)
        return self.value


def batch_lower_bound_unbiased(n, s_star, lam, sigma, rho, j):
    """Smallest batch keeping the unbiased anchor error within ``sigma rho^(2j)``."""
    return n * s_star / (s_star + lam**2 * math.sqrt(n) * sigma * rho ** (2 * j))


def biased_bound_coef(lam):
    if not 0 < lam < 1:
        raise DomainError("lambda must lie in (0, 1)")
    if lam == math.sqrt(2.0) / 2.0:
        raise DomainError("biased batch bound is undefined at lambda = sqrt(2)/2")
    if lam < math.sqrt(2.0) / 2.0:
        return (1.0 - lam) ** 2
    return (3.0 * lam**2 - 2.0 * lam) ** 2


def batch_lower_bound_biased(n, s_star, lam, sigma, rho, j):
    c = biased_bound_coef(lam)
    return n * s_star / (s_star + c * math.sqrt(n) * sigma * rho ** (2 * j))

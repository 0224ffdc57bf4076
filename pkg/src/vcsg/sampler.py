"""Seeded draws: uniform index subsets, geometric epoch lengths, output epochs.

A run owns one ``numpy.random.Generator`` (PCG64) and consumes it in a fixed
call order, so a seed pins the whole trace.
"""
import math

import numpy as np

from .errors import DomainError

GEOMETRIC_CAP_FACTOR = 50


def make_rng(seed):
    return np.random.default_rng(seed)


def sample_subset(rng, n, m):
    """Uniform size-``m`` subset of ``range(n)`` without replacement, sorted."""
    n, m = int(n), int(m)
    if m < 1:
        raise DomainError("subset size must be at least 1")
    if m > n:
        raise DomainError(f"subset size {m} exceeds population {n}")
    if m == n:
        return np.arange(n, dtype=np.int64)
    if m == 1:
        return np.array([rng.integers(n)], dtype=np.int64)
    return np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)


def geometric_cap(B, b):
    return int(math.ceil(GEOMETRIC_CAP_FACTOR * B / b))


def sample_geometric(rng, B, b, cap=None, size=None):
    """Draw ``N ~ Geom(B/(B+b))`` on ``{0, 1, 2, ...}``, so ``E[N] = B/b``.

    ``P(N = k) = (1 - g) g^k`` with ``g = B/(B+b)``. If ``cap`` is given the
    draw is truncated to it; returns ``(N, capped)``. With ``size`` both are
    arrays of that many independent draws.
    """
    if B <= 0 or b <= 0:
        raise DomainError("B and b must be positive")
    # numpy's geometric counts trials up to and including the first success
    if size is not None:
        N = rng.geometric(b / (B + b), size=size).astype(np.int64) - 1
        capped = N > cap if cap is not None else np.zeros(N.shape, dtype=bool)
        if cap is not None:
            N = np.minimum(N, int(cap))
        return N, capped
    N = int(rng.geometric(b / (B + b))) - 1
    if cap is not None and N > cap:
        return int(cap), True
    return N, False


def sample_output_index(rng, weights):
    """Index ``j`` drawn with probability ``weights[j] / sum(weights)``."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise DomainError("at least one weight must be positive")
    if w.size == 1:
        return 0
    return int(rng.choice(w.size, p=w / total))

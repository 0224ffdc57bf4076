"""Bound calculators and numeric checks for the batching-SVRG theory.

The one-epoch bounds take the form

    E||grad f(x~_j)||^2 <= (2L/gamma) Df / (theta sum_j b^(alpha-1) B^(1-alpha))
                           + c(lambda) I(B<n) S* / (theta B^(1-2 alpha))

with ``c = 2 lambda^4`` (weighted unbiased estimator, denominator ``theta``) or
``c = 2 (1-lambda)^2`` (biased estimator, denominator ``Theta``), where
``I(B<n) = (n-B)/((n-1)B)``. Complexity figures drop all hidden constants and
are order-of-magnitude diagnostics only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .estimators import BIASED, LAMBDA_UNBIASED_STAR, WEIGHTED_UNBIASED

GAMMA_MAX_UNBIASED = 13.0 / 50.0
GAMMA_MAX_BIASED = 1.0 / 3.0
PROOF_CONSTANT = 1.16
UNBIASED = "unbiased"


@dataclass(frozen=True)
class BoundInputs:
    L: float = 1.0
    gamma: float = GAMMA_MAX_UNBIASED
    alpha: float = 0.0
    beta: float = 0.25
    lam: float = LAMBDA_UNBIASED_STAR
    delta_f: float = 1.0
    s_star: float = 1.0
    sigma: float = 1.0
    rho: float = 0.9
    epsilon: float = 1e-3
    n: int = 1000
    T: int = 100
    B: float = 100.0
    b: float = 4.0

    def __post_init__(self):
        for name in ("L", "gamma", "alpha", "beta", "delta_f", "s_star", "sigma",
                     "epsilon", "n", "T", "B", "b"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if not 0 < self.lam < 1:
            raise DomainError("lam must lie in (0, 1)")
        if not self.rho < 1:
            raise DomainError("rho must be < 1")
        if self.B < 3:
            raise DomainError("B must be at least 3")

    def to_dict(self):
        return asdict(self)


def indicator(B, n):
    """``(n - B)/((n - 1) B)`` for ``B < n``, else 0."""
    if B >= n:
        return 0.0
    return (n - B) / ((n - 1) * B)


def theta_unbiased(inp: BoundInputs):
    """Denominator of the weighted-unbiased one-epoch bound."""
    a, be, B, w = inp.alpha, inp.beta, inp.B, (1.0 - inp.lam) ** 2
    return (2.0 * (1.0 - inp.lam)
            - (2.0 * inp.gamma * B ** (a * be - a) + 2.0 * B ** (be - 1.0)) * w
            - PROOF_CONSTANT * w)


def theta_biased(inp: BoundInputs):
    """Denominator of the biased one-epoch bound (``Theta``)."""
    a, be, B, w = inp.alpha, inp.beta, inp.B, (1.0 - inp.lam) ** 2
    return (2.0 * (1.0 - inp.lam)
            - (2.0 * inp.gamma * B ** (a * be - a) + 2.0 * B ** (be - 1.0)
               - 4.0 * inp.L * B ** (2.0 * a - 2.0)) * w
            - PROOF_CONSTANT * w)


def theta_grid(B, gamma, lam, alpha, beta):
    """Vectorized ``theta`` over broadcastable arrays."""
    B, gamma, lam = np.asarray(B, float), np.asarray(gamma, float), np.asarray(lam, float)
    w = (1.0 - lam) ** 2
    return (2.0 * (1.0 - lam)
            - (2.0 * gamma * B ** (alpha * beta - alpha) + 2.0 * B ** (beta - 1.0)) * w
            - PROOF_CONSTANT * w)


def _epoch_sum(inp):
    return inp.T * inp.b ** (inp.alpha - 1.0) * inp.B ** (1.0 - inp.alpha)


def _upper_bound(inp, denom, weight):
    if not denom > 0:
        raise DomainError(f"bound is vacuous: denominator {denom:.4g} <= 0")
    if inp.gamma <= 0:
        raise DomainError("gamma must be positive for the bound")
    first = (2.0 * inp.L / inp.gamma) * inp.delta_f / (denom * _epoch_sum(inp))
    second = (weight * indicator(inp.B, inp.n) * inp.s_star
              / (denom * inp.B ** (1.0 - 2.0 * inp.alpha)))
    return first + second


def upper_bound_unbiased(inp: BoundInputs):
    return _upper_bound(inp, theta_unbiased(inp), 2.0 * inp.lam**4)


def upper_bound_biased(inp: BoundInputs):
    return _upper_bound(inp, theta_biased(inp), 2.0 * (1.0 - inp.lam) ** 2)


def complexity_bound(inp: BoundInputs):
    """``B + sqrt(B) L Df / eps`` with ``B = min(1/eps, sqrt(n))``, constants dropped."""
    if not inp.epsilon > 0:
        raise DomainError("epsilon must be positive")
    B = min(1.0 / inp.epsilon, math.sqrt(inp.n))
    return B + math.sqrt(B) * inp.L * inp.delta_f / inp.epsilon


def positivity_region_ok(inp: BoundInputs, points=100, B_max=1e4):
    """``theta > 0`` for all ``B in [3, B_max]`` (log grid), ``gamma in [0, 13/50]``
    at the inputs' ``lam``, ``alpha`` and ``beta``."""
    B = np.geomspace(3.0, B_max, points)[:, None]
    gamma = np.linspace(0.0, GAMMA_MAX_UNBIASED, points)[None, :]
    return bool(np.all(theta_grid(B, gamma, inp.lam, inp.alpha, inp.beta) > 0))


def analyze(inp: BoundInputs):
    """Summary of every calculator; vacuous bounds are reported as ``None``."""

    def safe(fn):
        try:
            return fn(inp)
        except DomainError:
            return None

    return {
        "theta": theta_unbiased(inp),
        "Theta": theta_biased(inp),
        "bound_unbiased": safe(upper_bound_unbiased),
        "bound_biased": safe(upper_bound_biased),
        "complexity": complexity_bound(inp),
        "positivity_region_ok": positivity_region_ok(inp),
    }


# --- checks against runs -----------------------------------------------------


@dataclass
class BoundReport:
    kind: str
    applicable: bool
    preconditions_met: bool
    reasons: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    empirical: list = field(default_factory=list)
    rhs: list = field(default_factory=list)

    @property
    def violations(self):
        return [j for j, e, r in zip(self.epochs, self.empirical, self.rhs) if e > r]

    @property
    def holds(self):
        """``None`` when the comparison is not meaningful."""
        if not (self.applicable and self.preconditions_met):
            return None
        return not self.violations


def mean_delta_f(traces, f_lower):
    """Average ``f(x~_0) - f_lower`` over runs; an upper bound on the mean gap."""
    return float(np.mean([t.f0 for t in traces])) - f_lower


def verify_theorem_bound(traces, inp: BoundInputs, kind=UNBIASED):
    """Compare the across-run mean of ``||grad f(x~_j)||^2`` with the bound at ``T = j``.

    ``traces`` come from constant-schedule batching-SVRG runs with the
    weighted-unbiased (``kind="unbiased"``) or biased (``kind="biased"``)
    estimator. Unmet preconditions are reported, never asserted through.
    """
    if isinstance(traces, (list, tuple)):
        traces = list(traces)
    else:
        traces = [traces]
    report = BoundReport(kind, True, True)
    want = WEIGHTED_UNBIASED if kind == UNBIASED else BIASED
    if kind not in (UNBIASED, BIASED):
        raise DomainError(f"unknown bound kind {kind!r}")

    for t in traces:
        est = getattr(t, "estimator", None) or ""
        if not est.startswith(want):
            report.applicable = False
            report.reasons.append(f"trace estimator {est!r} does not match {kind}")
            break
    schedules = {(r.B, r.b, r.eta, r.lam) for t in traces for r in t.records}
    if len(schedules) != 1:
        report.applicable = False
        report.reasons.append("schedule is not constant")
    if not report.applicable:
        report.preconditions_met = False
        return report

    (B, b, eta, lam), = schedules
    gamma_max = GAMMA_MAX_UNBIASED if kind == UNBIASED else GAMMA_MAX_BIASED
    checks = [
        (0 <= inp.gamma <= gamma_max, f"gamma {inp.gamma} outside [0, {gamma_max:.4g}]"),
        (B >= 3, "batch size below 3"),
        (b <= B and b >= B**inp.beta - 1e-9, "mini-batch outside [B^beta, B]"),
        (B == inp.B and b == inp.b, "bound inputs B, b differ from the runs"),
        (math.isclose(lam, inp.lam, rel_tol=1e-12), "lambda differs from the runs"),
        (math.isclose(eta * inp.L, inp.gamma * (b / B) ** inp.alpha, rel_tol=1e-9),
         "step size is not (gamma/L)(b/B)^alpha"),
    ]
    denom = theta_unbiased(inp) if kind == UNBIASED else theta_biased(inp)
    checks.append((denom > 0, "theta is not positive"))
    for ok, why in checks:
        if not ok:
            report.preconditions_met = False
            report.reasons.append(why)
    if not report.preconditions_met:
        return report

    bound = upper_bound_unbiased if kind == UNBIASED else upper_bound_biased
    epochs = min(len(t.records) for t in traces)
    for j in range(1, epochs + 1):
        report.epochs.append(j)
        report.empirical.append(float(np.mean([t.records[j - 1].grad_norm_sq
                                               for t in traces])))
        report.rhs.append(bound(_with(inp, T=j)))
    return report


def _with(inp, **kw):
    from dataclasses import replace

    return replace(inp, **kw)


# --- numeric forms of the technical lemmas ----------------------------------


def subset_mean_sq_enumerated(vectors, m):
    """Mean of ``||mean_{i in J} x_i - mean_i x_i||^2`` over all size-``m`` subsets ``J``."""
    X = np.asarray(vectors, dtype=float)
    mu = X.mean(axis=0)
    total, count = 0.0, 0
    for J in itertools.combinations(range(X.shape[0]), m):
        dev = X[list(J)].mean(axis=0) - mu
        total += float(dev @ dev)
        count += 1
    return total / count


def subset_variance_formula(vectors, m):
    """``(M - m)/((M - 1) m) * (1/M) sum_i ||x_i - mean||^2``."""
    X = np.asarray(vectors, dtype=float)
    M = X.shape[0]
    if M == 1:
        return 0.0
    dev = X - X.mean(axis=0)
    return (M - m) / ((M - 1) * m) * float(np.einsum("ij,ij->", dev, dev)) / M


def geometric_identity_mc(rng, gamma, D, draws):
    """Monte-Carlo check of ``E(D_N - D_{N+1}) = (1/gamma - 1)(D_0 - E D_N)``.

    ``D`` is a callable on integer arrays. Returns ``(estimate, target, stderr)``
    for ``E[D_N - D_{N+1} + (1/gamma - 1) D_N]`` against ``(1/gamma - 1) D_0``.
    """
    N = rng.geometric(1.0 - gamma, size=draws) - 1
    c = 1.0 / gamma - 1.0
    Z = D(N) - D(N + 1) + c * D(N)
    return float(Z.mean()), float(c * D(np.array([0]))[0]), float(Z.std(ddof=1) / math.sqrt(draws))


def lambda_inequality_gap(x, y, lam):
    """``(1-lam)^2 (x-y)^2 - ((1-lam) x - lam y)^2``; non-negative when the inequality holds."""
    x, y, lam = (np.asarray(v, dtype=float) for v in (x, y, lam))
    return (1.0 - lam) ** 2 * (x - y) ** 2 - ((1.0 - lam) * x - lam * y) ** 2

"""Epoch-structured optimizers: batching SVRG, VCSG and the SGD/SVRG/SCSG baselines.

All variance-reduced methods share one epoch engine. Epoch ``j``:

1. sample an anchor batch ``I_j`` of size ``B_j`` and set ``g_j`` to its mean
   gradient at the anchor ``x~_{j-1}``;
2. draw ``N_j ~ Geom(B_j/(B_j+b_j))``;
3. take ``N_j`` steps ``x <- x - eta_j v`` where ``v`` combines the gradients of
   a fresh size-``b_j`` mini-batch at ``x`` and at the anchor with ``g_j``;
4. ``x~_j`` is the last inner iterate.

The returned point is one of ``x~_1..x~_T`` drawn with probability
proportional to ``eta_j B_j / b_j``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import sampler
from .errors import ConfigError, DivergenceError
from .estimators import (
    LAMBDA_UNBIASED_STAR,
    WEIGHTED_UNBIASED,
    EstimatorKind,
    combine,
)
from .oracle import (
    IfoCounter,
    ProblemSpec,
    batch_components,
    grad_component,
    grad_norm_sq,
    objective_value,
    pair_unchecked,
    variance_S,
)
from .schedules import (
    EpochDecision,
    ScheduleConfig,
    VarianceEstimate,
    estimate_s_star,
    initial_epoch,
    resolve_epoch,
)

ALGORITHMS = ("vcsg", "batching_svrg", "sgd", "svrg", "scsg")
FIXED_REGIME = "fixed"
SGD_REGIME = "sgd"
SGD_SCALE = 0.5
DIVERGENCE_NORM = 1e8

CSV_COLUMNS = ("j", "regime", "B", "b", "eta", "lambda", "N", "ifo", "f",
               "grad_norm_sq", "s_star")


@dataclass
class EpochRecord:
    j: int
    regime: str
    B: int
    b: int
    eta: float
    lam: float
    N: int
    ifo: int
    f: float
    grad_norm_sq: float
    s_star: float
    capped: bool = False
    # eps-regime VCSG epochs: inner steps that used lambda* rather than 1/2
    lambda_star_steps: int = 0

    def row(self):
        return (self.j, self.regime, self.B, self.b, self.eta, self.lam, self.N,
                self.ifo, self.f, self.grad_norm_sq, self.s_star)


@dataclass
class RunTrace:
    """Per-epoch history of a run, starting from ``x~_0``."""

    f0: float
    grad_norm_sq0: float
    x0: np.ndarray
    records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    evaluations: int = 0
    estimator: str = ""

    @property
    def delta_f(self):
        """``f(x~_0)`` minus the best objective value seen."""
        best = min([self.f0] + [r.f for r in self.records])
        return self.f0 - best

    @property
    def final_ifo(self):
        return self.records[-1].ifo if self.records else 0

    @property
    def cap_events(self):
        return sum(r.capped for r in self.records)

    def ledger_ifo(self):
        """``sum_j (B_j + b_j N_j)``, the cost implied by the schedule columns."""
        return sum(r.B + r.b * r.N for r in self.records)

    def ifo_to_target(self, target):
        return ifo_to_target(self.records, target)


def ifo_to_target(records, target):
    """First cumulative IFO at which ``grad_norm_sq <= target``, else ``None``."""
    for r in records:
        if r.grad_norm_sq <= target:
            return r.ifo
    return None


@dataclass
class RunResult:
    x: np.ndarray
    index: int  # epoch j of the sampled output, 1-based
    trace: RunTrace
    ifo_to_target: int | None
    algorithm: str = ""
    seed: int = 0
    wall_clock: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    """One optimizer run.

    ``batch``, ``mini_batch`` and ``eta`` configure ``batching_svrg`` and may
    be constants or per-epoch lists; ``batch=None`` means ``n`` and ``eta=None``
    means ``(gamma/L) (b/B)^alpha``. ``eta0`` is SGD's initial step (default
    ``1/(3 L sqrt(n))``); ``scsg_batch`` overrides SCSG's ``min(ceil(S*/eps), n)``.
    ``schedule.L`` of ``None`` takes the objective's ``L``.
    """

    problem: ProblemSpec = field(default_factory=ProblemSpec)
    algorithm: str = "vcsg"
    schedule: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(L=1.0))
    L: float | None = None
    estimator: EstimatorKind = field(default_factory=EstimatorKind.plain)
    batch: int | Sequence[int] | None = None
    mini_batch: int | Sequence[int] = 1
    eta: float | Sequence[float] | None = None
    eta0: float | None = None
    scsg_batch: int | None = None
    seed: int = 0
    epsilon_stop: float | None = None
    target_epsilon: float = 1e-3
    x0_scale: float = 0.1
    name: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; "
                              f"expected one of {', '.join(ALGORITHMS)}")

    @property
    def T(self):
        return self.schedule.T

    @property
    def label(self):
        return self.name or self.algorithm

    def resolved_schedule(self, obj):
        return replace(self.schedule, n=obj.n, L=float(self.L or obj.L))


# --- shared machinery --------------------------------------------------------


class _Run:
    """Mutable state of one run: counters, trace and divergence checks."""

    def __init__(self, obj, rng, x0, T, epsilon_stop=None):
        self.obj = obj
        self.rng = rng
        self.counter = IfoCounter()
        self.evals = IfoCounter()
        self.T = T
        self.epsilon_stop = epsilon_stop
        f0 = objective_value(obj, x0)
        self.trace = RunTrace(f0, grad_norm_sq(obj, x0, self.evals), x0.copy())
        if not math.isfinite(f0):
            raise DivergenceError("objective is not finite at the initial point", self.trace)

    def check_step(self, x, j):
        # NaN fails the comparison too
        if not float(x @ x) <= DIVERGENCE_NORM**2:
            raise DivergenceError(f"iterate diverged in epoch {j}", self.trace)

    def record(self, j, x, regime, B, b, eta, lam, N, s_star, **extra):
        self.check_step(x, j)
        f = objective_value(self.obj, x)
        if not math.isfinite(f):
            raise DivergenceError(f"objective is not finite after epoch {j}", self.trace)
        rec = EpochRecord(j, regime, int(B), int(b), float(eta), float(lam), int(N),
                          self.counter.count, f, grad_norm_sq(self.obj, x, self.evals),
                          float(s_star), **extra)
        self.trace.records.append(rec)
        self.trace.iterates.append(x.copy())
        self.trace.evaluations = self.counter.evaluations
        return rec

    def stop(self, rec):
        return self.epsilon_stop is not None and rec.grad_norm_sq <= self.epsilon_stop

    def finish(self, weights, algorithm, seed, target, started):
        j = sampler.sample_output_index(self.rng, weights)
        return RunResult(self.trace.iterates[j].copy(), j + 1, self.trace,
                         self.trace.ifo_to_target(target), algorithm, seed,
                         time.perf_counter() - started)


def initial_point(obj, scale, rng):
    return scale * rng.standard_normal(obj.d)


def vcsg_direction(gk, g0, gj):
    """Eps-regime VCSG direction; returns ``(v, used_lambda_star)``.

    The mini-batch gradients are compared by Euclidean norm; ties take the
    ``lambda = 1/2`` branch.
    """
    if gk @ gk < g0 @ g0:
        return combine(WEIGHTED_UNBIASED, LAMBDA_UNBIASED_STAR, gk, g0, gj), True
    return combine(WEIGHTED_UNBIASED, 0.5, gk, g0, gj), False


def _vr_epoch(run, j, x_prev, dec: EpochDecision):
    """One anchor-plus-inner-loop epoch; returns ``(x, G, g_j, N, capped, star_steps)``."""
    obj, rng = run.obj, run.rng
    I = sampler.sample_subset(rng, obj.n, dec.B)
    _, G = batch_components(obj, I, x_prev, run.counter)
    gj = G.sum(axis=0) / G.shape[0]
    N, capped = sampler.sample_geometric(rng, dec.B, dec.b,
                                         cap=sampler.geometric_cap(dec.B, dec.b))
    x = x_prev.copy()
    star_steps = 0
    kind, lam = dec.estimator.kind, dec.estimator.lam
    for _ in range(N):
        mb = sampler.sample_subset(rng, obj.n, dec.b)
        gk, g0 = pair_unchecked(obj, mb, x, x_prev, run.counter)
        if dec.switching:
            v, used = vcsg_direction(gk, g0, gj)
            star_steps += used
        else:
            v = combine(kind, lam, gk, g0, gj)
        x = x - dec.eta * v
        run.check_step(x, j)
    return x, G, gj, N, capped, star_steps


def _per_epoch(value, T, name):
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) != T:
            raise ConfigError(f"{name} schedule has {len(value)} entries, expected T={T}")
        return list(value)
    return [value] * T


# --- algorithms --------------------------------------------------------------


def run_batching_svrg(obj, cfg: RunConfig, estimator: EstimatorKind | None = None,
                      rng=None, x0=None):
    """Batching SVRG with fixed per-epoch ``(B_j, b_j, eta_j)`` and a fixed estimator."""
    started = time.perf_counter()
    rng = sampler.make_rng(cfg.seed) if rng is None else rng
    estimator = cfg.estimator if estimator is None else estimator
    sched = cfg.resolved_schedule(obj)
    T = sched.T
    if x0 is None:
        x0 = initial_point(obj, cfg.x0_scale, rng)
    Bs = [obj.n if B is None else int(B) for B in _per_epoch(cfg.batch, T, "batch")]
    bs = [int(b) for b in _per_epoch(cfg.mini_batch, T, "mini_batch")]
    etas = _per_epoch(cfg.eta, T, "eta")
    for B, b in zip(Bs, bs):
        if not 1 <= b <= B <= obj.n:
            raise ConfigError(f"need 1 <= b <= B <= n, got b={b}, B={B}, n={obj.n}")
    etas = [sched.gamma / sched.L * (b / B) ** sched.alpha if eta is None else float(eta)
            for eta, B, b in zip(etas, Bs, bs)]

    run = _Run(obj, rng, np.asarray(x0, dtype=float), T, cfg.epsilon_stop)
    run.trace.estimator = str(estimator)
    x = run.trace.x0.copy()
    weights = []
    for j in range(1, T + 1):
        B, b, eta = Bs[j - 1], bs[j - 1], etas[j - 1]
        dec = EpochDecision(FIXED_REGIME, B, b, eta, estimator.weight, estimator)
        x, G, gj, N, capped, _ = _vr_epoch(run, j, x, dec)
        s_star = estimate_s_star(G, gj, previous=float("nan"))
        rec = run.record(j, x, FIXED_REGIME, B, b, eta, estimator.weight, N, s_star,
                         capped=capped)
        weights.append(eta * B / b)
        if run.stop(rec):
            break
    return run.finish(weights, cfg.algorithm, cfg.seed, cfg.target_epsilon, started)


def run_vcsg(obj, cfg: RunConfig, rng=None):
    """VCSG: batch size driven by a running S* estimate, regime-dependent estimator.

    The first epoch uses the full batch with the biased 5/8 estimator. The S*
    estimated from epoch ``j``'s anchor batch sets ``B_{j+1}``.
    """
    started = time.perf_counter()
    rng = sampler.make_rng(cfg.seed) if rng is None else rng
    sched = cfg.resolved_schedule(obj)
    x0 = initial_point(obj, cfg.x0_scale, rng)
    run = _Run(obj, rng, x0, sched.T, cfg.epsilon_stop)
    run.trace.estimator = "vcsg"
    s_star = VarianceEstimate(sched.s_star_smoothing)
    x = run.trace.x0.copy()
    weights = []
    for j in range(1, sched.T + 1):
        dec = initial_epoch(sched) if j == 1 else resolve_epoch(j, s_star.value, sched)
        x, G, gj, N, capped, star_steps = _vr_epoch(run, j, x, dec)
        s_star.update(estimate_s_star(G, gj, previous=s_star.value))
        rec = run.record(j, x, dec.regime, dec.B, dec.b, dec.eta, dec.lam, N, s_star.value,
                         capped=capped, lambda_star_steps=star_steps)
        weights.append(dec.eta * dec.B / dec.b)
        if run.stop(rec):
            break
    return run.finish(weights, "vcsg", cfg.seed, cfg.target_epsilon, started)


def run_sgd(obj, cfg: RunConfig, rng=None):
    """Scaled SGD: per epoch ``n`` single-sample steps ``x -= (eta0/j) * 0.5 * grad f_i``."""
    started = time.perf_counter()
    rng = sampler.make_rng(cfg.seed) if rng is None else rng
    sched = cfg.resolved_schedule(obj)
    eta0 = cfg.eta0 if cfg.eta0 is not None else 1.0 / (3.0 * sched.L * math.sqrt(obj.n))
    x0 = initial_point(obj, cfg.x0_scale, rng)
    run = _Run(obj, rng, x0, sched.T, cfg.epsilon_stop)
    run.trace.estimator = "sgd"
    x = run.trace.x0.copy()
    weights = []
    for j in range(1, sched.T + 1):
        eta = eta0 / j
        for _ in range(obj.n):
            i = int(sampler.sample_subset(rng, obj.n, 1)[0])
            x = x - eta * SGD_SCALE * grad_component(obj, i, x, run.counter)
            run.check_step(x, j)
        # no anchor batch: B = 0 and the n steps cost b * N = n
        rec = run.record(j, x, SGD_REGIME, 0, 1, eta, SGD_SCALE, obj.n, float("nan"))
        weights.append(eta)
        if run.stop(rec):
            break
    return run.finish(weights, "sgd", cfg.seed, cfg.target_epsilon, started)


def svrg_config(obj, cfg: RunConfig):
    """Baseline SVRG: full anchor, ``b = 1``, lambda = 1/2, ``eta = 1/(3 L sqrt(n))``."""
    L = float(cfg.L or obj.L)
    return replace(cfg, batch=obj.n, mini_batch=1,
                   eta=1.0 / (3.0 * L * math.sqrt(obj.n)),
                   estimator=EstimatorKind.weighted_unbiased(0.5))


def run_svrg(obj, cfg: RunConfig, rng=None):
    res = run_batching_svrg(obj, svrg_config(obj, cfg), rng=rng)
    res.algorithm = "svrg"
    return res


def scsg_batch_size(obj, cfg: RunConfig, x0):
    """``min(ceil(S*/eps), n)`` with S* the exact variance at ``x0``.

    The variance is evaluated off the run's IFO ledger.
    """
    if cfg.scsg_batch is not None:
        return min(max(int(cfg.scsg_batch), 1), obj.n)
    s = variance_S(obj, x0, IfoCounter())
    return min(max(math.ceil(s / cfg.schedule.epsilon), 1), obj.n)


def run_scsg(obj, cfg: RunConfig, rng=None):
    """SCSG: plain estimator, ``b = 1``, fixed ``B``, ``eta = (gamma/L) B^(-2/3)``."""
    rng = sampler.make_rng(cfg.seed) if rng is None else rng
    sched = cfg.resolved_schedule(obj)
    x0 = initial_point(obj, cfg.x0_scale, rng)
    B = scsg_batch_size(obj, cfg, x0)
    scfg = replace(cfg, batch=B, mini_batch=1, estimator=EstimatorKind.plain(),
                   eta=sched.gamma / sched.L * B ** (-2.0 / 3.0))
    res = run_batching_svrg(obj, scfg, rng=rng, x0=x0)
    res.algorithm = "scsg"
    return res


def run(cfg: RunConfig, obj=None):
    """Build the problem (unless given) and dispatch on ``cfg.algorithm``."""
    from .oracle import make_problem

    obj = make_problem(cfg.problem) if obj is None else obj
    if cfg.algorithm == "vcsg":
        return run_vcsg(obj, cfg)
    if cfg.algorithm == "batching_svrg":
        return run_batching_svrg(obj, cfg)
    if cfg.algorithm == "sgd":
        return run_sgd(obj, cfg)
    if cfg.algorithm == "svrg":
        return run_svrg(obj, cfg)
    return run_scsg(obj, cfg)

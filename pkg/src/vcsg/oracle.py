"""Finite-sum objectives with counted gradient access.

An objective is ``f(x) = (1/n) sum_i f_i(x)``. Every component gradient the
optimizers request goes through an :class:`IfoCounter`, so the number of
incremental first-order oracle (IFO) calls of a run is known exactly.

Component indices are 0-based (``0 <= i < n``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DomainError

# sup |d^2/dz^2 sigmoid(z)|, attained at z = log(2 +- sqrt(3))
SIGMOID_CURVATURE = 1.0 / (6.0 * np.sqrt(3.0))
L_PROBE_PAIRS = 100
L_SAFETY = 1.5


class IfoCounter:
    """Cumulative IFO cost of a run.

    ``count`` is the reported cost: one unit per component index touched by a
    batch gradient, with an inner-loop index evaluated at the current point and
    at the epoch anchor charged once (the pair is one unit of inner-loop work).
    ``evaluations`` counts every single component gradient computed.

    Not thread safe; a counter belongs to a single run.
    """

    __slots__ = ("count", "evaluations")

    def __init__(self, count: int = 0, evaluations: int | None = None):
        self.count = int(count)
        self.evaluations = self.count if evaluations is None else int(evaluations)

    def add(self, k: int, evaluations: int | None = None) -> None:
        if k < 0:
            raise DomainError("IFO increments are non-negative")
        self.count += int(k)
        self.evaluations += int(k) if evaluations is None else int(evaluations)

    def __repr__(self):
        return f"IfoCounter({self.count}, evaluations={self.evaluations})"


class FiniteSumObjective:
    """Base class for ``f = mean_i f_i`` over ``n`` components in ``R^d``.

    Subclasses implement ``_values(idx, x)`` returning ``f_i(x)`` for each
    index and ``_grads(idx, x)`` returning the ``(len(idx), d)`` matrix of
    component gradients. ``idx`` is always a sorted int64 array.

    Attributes
    ----------
    L : float
        Smoothness constant of ``f`` (analytic or probe-estimated).
    f_lower : float
        A known lower bound on ``inf f`` (exact where available).
    x_star : ndarray or None
        An analytically known stationary point, if any.
    probe_ifo : int
        Component gradients spent while estimating ``L``; never charged to a run.
    """

    name = "objective"

    def __init__(self, n: int, d: int):
        self.n = int(n)
        self.d = int(d)
        self.L: float = float("nan")
        self.L_analytic = False
        self.f_lower = 0.0
        self.x_star: np.ndarray | None = None
        self.probe_ifo = 0

    def _values(self, idx, x):
        raise NotImplementedError

    def _grads(self, idx, x):
        raise NotImplementedError

    def component_values(self, idx, x):
        return self._values(np.asarray(idx, dtype=np.int64), x)

    def component_grads(self, idx, x):
        return self._grads(np.asarray(idx, dtype=np.int64), x)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, d={self.d}, L={self.L:.4g})"


def _check_point(obj, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.d,):
        raise DomainError(f"point has shape {x.shape}, expected ({obj.d},)")
    if not np.all(np.isfinite(x)):
        raise DomainError("point is not finite")
    return x


def _check_indices(obj, indices):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise DomainError("index set is empty")
    idx = np.sort(idx)
    if idx[0] < 0 or idx[-1] >= obj.n:
        raise DomainError(f"index out of range [0, {obj.n})")
    if idx.size > 1 and np.any(idx[1:] == idx[:-1]):
        raise DomainError("index set contains duplicates")
    return idx


def grad_component(obj, i, x, counter):
    """Gradient of the single component ``f_i`` at ``x``; costs one IFO."""
    x = _check_point(obj, x)
    if not 0 <= int(i) < obj.n:
        raise DomainError(f"component index {i} out of range [0, {obj.n})")
    g = obj._grads(np.array([int(i)], dtype=np.int64), x)[0]
    counter.add(1)
    return g


def batch_components(obj, indices, x, counter):
    """Component gradients for ``indices`` (ascending), one row each.

    Costs ``len(indices)`` IFO. Returns ``(idx, G)`` with the sorted indices.
    """
    x = _check_point(obj, x)
    idx = _check_indices(obj, indices)
    G = obj._grads(idx, x)
    counter.add(idx.size)
    return idx, G


def grad_batch(obj, indices, x, counter):
    """Mean of component gradients over ``indices``; costs ``|indices|`` IFO."""
    _, G = batch_components(obj, indices, x, counter)
    return G.sum(axis=0) / G.shape[0]


def grad_batch_pair(obj, indices, x, x_anchor, counter):
    """Mini-batch gradients at ``x`` and at the anchor ``x_anchor``.

    Charges ``|indices|`` to ``counter.count`` and ``2 |indices|`` evaluations.
    """
    x = _check_point(obj, x)
    x_anchor = _check_point(obj, x_anchor)
    return pair_unchecked(obj, _check_indices(obj, indices), x, x_anchor, counter)


def pair_unchecked(obj, idx, x, x_anchor, counter):
    """:func:`grad_batch_pair` for pre-validated sorted ``idx`` and finite points."""
    m = idx.size
    gk = obj._grads(idx, x).sum(axis=0) / m
    g0 = obj._grads(idx, x_anchor).sum(axis=0) / m
    counter.count += m
    counter.evaluations += 2 * m
    return gk, g0


def full_grad(obj, x, counter):
    """Gradient of ``f``; costs ``n`` IFO."""
    return grad_batch(obj, np.arange(obj.n), x, counter)


def objective_value(obj, x, counter=None):
    x = _check_point(obj, x)
    vals = obj._values(np.arange(obj.n, dtype=np.int64), x)
    if counter is not None:
        counter.add(obj.n)
    return float(vals.sum() / obj.n)


def variance_S(obj, x, counter):
    """Population variance ``(1/n) sum_i ||grad f_i(x) - grad f(x)||^2``.

    Costs ``n`` IFO; the component gradients are reused for the mean.
    """
    _, G = batch_components(obj, np.arange(obj.n), x, counter)
    mean = G.sum(axis=0) / obj.n
    dev = G - mean
    return float(np.einsum("ij,ij->", dev, dev) / obj.n)


def grad_norm_sq(obj, x, counter):
    """``||grad f(x)||^2``, the epsilon-accuracy measure.

    Pass an evaluation counter here, not the run's optimizer counter.
    """
    g = full_grad(obj, x, counter)
    return float(g @ g)


# --- built-in problems -------------------------------------------------------


class Quadratic(FiniteSumObjective):
    """``f_i(x) = 0.5 * ||x - c_i||^2``; minimizer ``mean(c_i)``."""

    name = "quadratic"

    def __init__(self, centers):
        centers = np.asarray(centers, dtype=float)
        super().__init__(*centers.shape)
        self.centers = centers
        self.L = 1.0
        self.L_analytic = True
        self.x_star = centers.mean(axis=0)
        dev = centers - self.x_star
        self.f_lower = float(0.5 * np.einsum("ij,ij->", dev, dev) / self.n)

    def _values(self, idx, x):
        r = x - self.centers[idx]
        return 0.5 * np.einsum("ij,ij->i", r, r)

    def _grads(self, idx, x):
        return x - self.centers[idx]


class SigmoidLoss(FiniteSumObjective):
    """Non-convex sigmoid classification loss with ridge penalty.

    ``f_i(x) = 1 / (1 + exp(y_i a_i.x)) + (reg / 2) ||x||^2`` with ``y_i in {-1, +1}``.
    """

    name = "sigmoid_loss"

    def __init__(self, A, y, reg=0.0):
        A = np.asarray(A, dtype=float)
        super().__init__(*A.shape)
        self.A = A
        self.y = np.asarray(y, dtype=float)
        self.reg = float(reg)
        self.L = SIGMOID_CURVATURE * _top_eig(A) + self.reg
        self.L_analytic = True
        self.f_lower = 0.0

    def _values(self, idx, x):
        # 1 / (1 + e^z) == sigmoid(-z)
        z = self.y[idx] * (self.A[idx] @ x)
        return expit(-z) + 0.5 * self.reg * (x @ x)

    def _grads(self, idx, x):
        A, y = self.A[idx], self.y[idx]
        s = expit(y * (A @ x))
        coef = -s * (1.0 - s) * y
        return coef[:, None] * A + self.reg * x


class NonconvexLeastSquares(FiniteSumObjective):
    """``f_i(x) = 0.5 (a_i.x - y_i)^2 + reg * sum_k x_k^2 / (1 + x_k^2)``."""

    name = "nonconvex_least_squares"

    def __init__(self, A, y, reg=0.0):
        A = np.asarray(A, dtype=float)
        super().__init__(*A.shape)
        self.A = A
        self.y = np.asarray(y, dtype=float)
        self.reg = float(reg)
        # the penalty t^2/(1+t^2) has curvature in [-1/2, 2]
        self.L = _top_eig(A) + 2.0 * self.reg
        self.L_analytic = True
        self.f_lower = 0.0

    def _values(self, idx, x):
        r = self.A[idx] @ x - self.y[idx]
        pen = np.sum(x * x / (1.0 + x * x))
        return 0.5 * r * r + self.reg * pen

    def _grads(self, idx, x):
        r = self.A[idx] @ x - self.y[idx]
        pen = 2.0 * x / (1.0 + x * x) ** 2
        return r[:, None] * self.A[idx] + self.reg * pen


class RosenbrockSum(FiniteSumObjective):
    """Scaled Rosenbrock links; component ``i`` couples coordinates ``k, k+1``.

    ``f_i(x) = s_i * 100 (x_{k+1} - x_k^2)^2 + t_i (1 - x_k)^2`` with
    ``k = i mod (d - 1)``. Every component vanishes at the all-ones point.
    """

    name = "rosenbrock_sum"

    def __init__(self, n, d, s, t):
        if d < 2:
            raise ConfigError("rosenbrock_sum needs d >= 2")
        super().__init__(n, d)
        self.s = np.asarray(s, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.k = np.arange(n) % (d - 1)
        self.x_star = np.ones(d)
        self.f_lower = 0.0

    def _values(self, idx, x):
        k = self.k[idx]
        a = x[k + 1] - x[k] ** 2
        return 100.0 * self.s[idx] * a * a + self.t[idx] * (1.0 - x[k]) ** 2

    def _grads(self, idx, x):
        k = self.k[idx]
        xk = x[k]
        a = x[k + 1] - xk**2
        G = np.zeros((idx.size, self.d))
        rows = np.arange(idx.size)
        G[rows, k] = -400.0 * self.s[idx] * a * xk - 2.0 * self.t[idx] * (1.0 - xk)
        G[rows, k + 1] = 200.0 * self.s[idx] * a
        return G


class TwoLayerMLP(FiniteSumObjective):
    """Squared loss of a tanh network ``v . tanh(W a)`` with ``hidden`` units.

    Parameters pack as ``x = [W.ravel(), v]`` so ``d = hidden * (p + 1)``
    for input dimension ``p``.
    """

    name = "two_layer_mlp"

    def __init__(self, inputs, targets, hidden):
        inputs = np.asarray(inputs, dtype=float)
        n, p = inputs.shape
        super().__init__(n, hidden * (p + 1))
        self.inputs = inputs
        self.targets = np.asarray(targets, dtype=float)
        self.hidden = int(hidden)
        self.p = p
        self.f_lower = 0.0

    def _unpack(self, x):
        h = self.hidden
        return x[: h * self.p].reshape(h, self.p), x[h * self.p :]

    def _forward(self, idx, x):
        W, v = self._unpack(x)
        a = self.inputs[idx]
        H = np.tanh(a @ W.T)
        return a, H, v, H @ v - self.targets[idx]

    def _values(self, idx, x):
        r = self._forward(idx, x)[3]
        return 0.5 * r * r

    def _grads(self, idx, x):
        a, H, v, r = self._forward(idx, x)
        back = r[:, None] * v[None, :] * (1.0 - H * H)  # (m, h)
        gW = back[:, :, None] * a[:, None, :]  # (m, h, p)
        gv = r[:, None] * H
        return np.concatenate([gW.reshape(idx.size, -1), gv], axis=1)


def _top_eig(A):
    """Largest eigenvalue of ``A^T A / n``."""
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] ** 2 / A.shape[0])


# --- problem construction ----------------------------------------------------

PROBLEM_DEFAULTS: dict[str, dict[str, Any]] = {
    "quadratic": {"spread": 1.0},
    "sigmoid_loss": {"reg": 1e-4, "label_noise": 0.0, "feature_scale": 1.5,
                     "condition": 30.0},
    "nonconvex_least_squares": {"reg": 1e-3, "noise": 0.1},
    "rosenbrock_sum": {"scale_low": 0.5, "scale_high": 1.5},
    "two_layer_mlp": {"hidden": 4, "noise": 0.0},
}

PROBLEM_DESCRIPTIONS = {
    "quadratic": "0.5*||x - c_i||^2, strongly convex, L = 1",
    "sigmoid_loss": "sigmoid classification loss + ridge, non-convex, analytic L",
    "nonconvex_least_squares": "least squares + sum x^2/(1+x^2) penalty, analytic L",
    "rosenbrock_sum": "scaled Rosenbrock links, minimizer at all-ones, probed L",
    "two_layer_mlp": "tanh network on teacher-generated data, probed L",
}


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "sigmoid_loss"
    n: int = 1000
    d: int = 20
    seed: int = 0
    params: dict = field(default_factory=dict)

    def resolved_params(self):
        if self.kind not in PROBLEM_DEFAULTS:
            raise ConfigError(f"unknown problem kind {self.kind!r}")
        defaults = PROBLEM_DEFAULTS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown params for {self.kind}: {sorted(unknown)}")
        return {**defaults, **self.params}

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "d": self.d, "seed": self.seed,
                "params": dict(self.params)}

    @classmethod
    def from_dict(cls, doc):
        unknown = set(doc) - {"kind", "n", "d", "seed", "params"}
        if unknown:
            raise ConfigError(f"unknown problem fields: {sorted(unknown)}")
        return cls(**doc)


def make_problem(spec: ProblemSpec) -> FiniteSumObjective:
    """Build the objective described by ``spec``; deterministic in ``spec``."""
    params = spec.resolved_params()
    n, d = int(spec.n), int(spec.d)
    if n < 1 or d < 1:
        raise ConfigError("n and d must be positive")
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "quadratic":
        obj = Quadratic(params["spread"] * rng.standard_normal((n, d)))
    elif spec.kind == "sigmoid_loss":
        # column scales fall geometrically from 1 to 1/condition
        cols = np.geomspace(1.0, 1.0 / params["condition"], d)
        A = params["feature_scale"] * rng.standard_normal((n, d)) * cols
        w = rng.standard_normal(d)
        y = np.where(A @ w >= 0, 1.0, -1.0)
        flip = rng.random(n) < params["label_noise"]
        y[flip] *= -1.0
        obj = SigmoidLoss(A, y, params["reg"])
    elif spec.kind == "nonconvex_least_squares":
        A = rng.standard_normal((n, d))
        x_true = rng.standard_normal(d)
        y = A @ x_true + params["noise"] * rng.standard_normal(n)
        obj = NonconvexLeastSquares(A, y, params["reg"])
        if params["reg"] == 0 and params["noise"] == 0:
            obj.x_star = x_true
    elif spec.kind == "rosenbrock_sum":
        lo, hi = params["scale_low"], params["scale_high"]
        obj = RosenbrockSum(n, d, rng.uniform(lo, hi, n), rng.uniform(lo, hi, n))
    elif spec.kind == "two_layer_mlp":
        h = int(params["hidden"])
        if h < 1 or d % h or d // h < 2:
            raise ConfigError("two_layer_mlp needs d = hidden * (p + 1) with p >= 1")
        p = d // h - 1
        inputs = rng.standard_normal((n, p))
        W = rng.standard_normal((h, p)) / np.sqrt(p)
        v = rng.standard_normal(h)
        targets = np.tanh(inputs @ W.T) @ v + params["noise"] * rng.standard_normal(n)
        obj = TwoLayerMLP(inputs, targets, h)
        if params["noise"] == 0:
            obj.x_star = np.concatenate([W.ravel(), v])
    else:  # pragma: no cover - resolved_params already rejects
        raise ConfigError(f"unknown problem kind {spec.kind!r}")

    if not obj.L_analytic:
        obj.L = estimate_smoothness(obj, np.random.default_rng([spec.seed, 1]))
    return obj


def estimate_smoothness(obj, rng, pairs=L_PROBE_PAIRS, safety=L_SAFETY):
    """Probe estimate of L: max gradient-difference ratio over random pairs.

    The probe cost is stored in ``obj.probe_ifo``.
    """
    probe = IfoCounter()
    best = 0.0
    for _ in range(pairs):
        x = rng.standard_normal(obj.d)
        y = x + 0.1 * rng.standard_normal(obj.d)
        diff = full_grad(obj, x, probe) - full_grad(obj, y, probe)
        best = max(best, float(np.linalg.norm(diff) / np.linalg.norm(x - y)))
    obj.probe_ifo += probe.count
    return safety * best

"""JSON configuration schema for the benchmark CLI.

A document is either a single run::

    {"problem": {"kind": "sigmoid_loss"}, "algorithm": "vcsg"}

or a bench with several runs and a seed list::

    {"runs": [...], "seeds": [0, 1, 2], "target_epsilon": 1e-3}

A bench may also give ``algorithms`` plus shared ``problem``/``schedule``
fields instead of ``runs``; each algorithm then becomes one run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import ConfigError
from ..estimators import EstimatorKind
from ..oracle import PROBLEM_DEFAULTS, ProblemSpec
from ..optimizers import ALGORITHMS, RunConfig
from ..schedules import ScheduleConfig

FORMATS = ("csv", "json", "both")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemModel(_Strict):
    kind: Literal[tuple(PROBLEM_DEFAULTS)]  # type: ignore[valid-type]
    n: int = Field(1000, ge=1)
    d: int = Field(20, ge=1)
    seed: int = Field(0, ge=0)
    params: dict[str, float] = Field(default_factory=dict)

    def to_spec(self):
        return ProblemSpec(self.kind, self.n, self.d, self.seed, dict(self.params))


class ScheduleModel(_Strict):
    epsilon: float = Field(1e-3, gt=0)
    sigma: float = Field(1.0, ge=0)
    rho: float = 0.9
    gamma: float = 1.0 / 3.0
    alpha: float = Field(0.0, ge=0, le=1)
    beta: float = Field(0.25, ge=0, le=1)
    T: int = Field(100, ge=1)
    c_B: float = Field(1.0, gt=0)
    s_star_smoothing: float = Field(0.5, ge=0, lt=1)

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v):
        if not 0 <= v <= 1.0 / 3.0:
            raise ValueError("gamma must be ≤ 1/3 (and non-negative)")
        return v

    @field_validator("rho")
    @classmethod
    def _rho(cls, v):
        if not 0 < v < 1:
            raise ValueError("rho must lie in (0, 1)")
        return v

    def to_schedule(self):
        return ScheduleConfig(**self.model_dump())


IntSchedule = Union[int, list[int]]
FloatSchedule = Union[float, list[float]]


class RunModel(_Strict):
    problem: ProblemModel
    algorithm: Literal[ALGORITHMS]  # type: ignore[valid-type]
    schedule: ScheduleModel = Field(default_factory=ScheduleModel)
    L: Optional[float] = Field(None, gt=0)
    estimator: str = "plain"
    batch: Optional[IntSchedule] = None
    mini_batch: IntSchedule = 1
    eta: Optional[FloatSchedule] = None
    eta0: Optional[float] = Field(None, gt=0)
    scsg_batch: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)
    epsilon_stop: Optional[float] = Field(None, gt=0)
    target_epsilon: float = Field(1e-3, gt=0)
    x0_scale: float = Field(0.1, ge=0)
    name: Optional[str] = None

    @field_validator("estimator")
    @classmethod
    def _estimator(cls, v):
        EstimatorKind.parse(v)
        return v

    def to_run_config(self, seed=None, target_epsilon=None):
        return RunConfig(
            problem=self.problem.to_spec(),
            algorithm=self.algorithm,
            schedule=self.schedule.to_schedule(),
            L=self.L,
            estimator=EstimatorKind.parse(self.estimator),
            batch=_tuple(self.batch),
            mini_batch=_tuple(self.mini_batch),
            eta=_tuple(self.eta),
            eta0=self.eta0,
            scsg_batch=self.scsg_batch,
            seed=self.seed if seed is None else seed,
            epsilon_stop=self.epsilon_stop,
            target_epsilon=self.target_epsilon if target_epsilon is None else target_epsilon,
            x0_scale=self.x0_scale,
            name=self.name,
        )


def _tuple(v):
    return tuple(v) if isinstance(v, list) else v


class BenchModel(_Strict):
    runs: list[RunModel] = Field(min_length=1)
    seeds: Optional[list[int]] = Field(None, min_length=1)
    out: str = "out"
    target_epsilon: Optional[float] = Field(None, gt=0)
    format: Literal[FORMATS] = "both"  # type: ignore[valid-type]
    jobs: int = Field(1, ge=1)


@dataclass(frozen=True)
class BenchConfig:
    """Validated bench: one ``RunConfig`` per (run, seed) cell."""

    runs: tuple
    seeds: tuple | None
    out: str
    target_epsilon: float | None
    format: str
    jobs: int

    def cells(self):
        """``(label, RunConfig)`` for every run and seed, runs outermost."""
        out = []
        for model in self.runs:
            seeds = self.seeds if self.seeds is not None else (model.seed,)
            for s in seeds:
                cfg = model.to_run_config(seed=s, target_epsilon=self.target_epsilon)
                out.append((cfg.label, cfg))
        return out

    @property
    def labels(self):
        labels = [m.name or m.algorithm for m in self.runs]
        if len(set(labels)) != len(labels):
            raise ConfigError("run labels must be unique; set 'name' on repeated algorithms")
        return labels


_BENCH_ONLY = ("seeds", "out", "format", "jobs")


def _expand(doc):
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "runs" in doc or "algorithms" in doc:
        doc = dict(doc)
        if "algorithms" in doc:
            if "runs" in doc:
                raise ConfigError("give either 'runs' or 'algorithms', not both")
            shared = {k: doc.pop(k) for k in list(doc)
                      if k in RunModel.model_fields and k not in BenchModel.model_fields}
            algos = doc.pop("algorithms")
            if not isinstance(algos, list):
                raise ConfigError("algorithms: expected a list")
            doc["runs"] = [{**shared, "algorithm": a} for a in algos]
        return doc
    run = dict(doc)
    bench = {k: run.pop(k) for k in _BENCH_ONLY if k in run}
    return {**bench, "runs": [run]}


def _format_errors(err: ValidationError):
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        lines.append(f"{loc}: {msg}")
    return "; ".join(lines)


def parse_config(doc) -> BenchConfig:
    """Validate an already-decoded JSON document."""
    try:
        m = BenchModel.model_validate(_expand(doc))
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None
    # surface dataclass-level checks (e.g. batch lists vs T) early
    for run in m.runs:
        try:
            run.to_run_config()
            run.problem.to_spec().resolved_params()
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err)) from None
    bench = BenchConfig(tuple(m.runs), None if m.seeds is None else tuple(m.seeds),
                        m.out, m.target_epsilon, m.format, m.jobs)
    bench.labels
    return bench


def load_config(path) -> BenchConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror or err}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None
    try:
        return parse_config(doc)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None

"""Trace persistence and comparison tables.

Per-epoch traces are CSV with a fixed header; run summaries are JSON. Every
file is written to a temporary sibling and renamed into place, so a reader
never sees a partial file. Comparison tables are rebuilt from these files
alone.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..optimizers import CSV_COLUMNS, EpochRecord, RunResult, RunTrace

_INT_COLUMNS = {"j", "B", "b", "N", "ifo"}
_STR_COLUMNS = {"regime"}


def _atomic_write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as err:
        raise OSError(f"cannot write {path}: {err.strerror or err}") from err


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_csv(trace: RunTrace) -> str:
    """CSV text for a trace; floats use ``repr`` so parsing is lossless."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in trace.records:
        w.writerow([_fmt(v) for v in rec.row()])
    return buf.getvalue()


def emit_trace(trace: RunTrace, path, format="csv", result: RunResult | None = None,
               config=None):
    """Write ``<path>.csv`` and/or ``<path>.json``; returns the written paths.

    ``path`` is a stem; a ``.csv`` or ``.json`` suffix on it is dropped. The
    JSON summary needs ``result`` for the output point and index; without it
    only trace-level fields are written.
    """
    if format not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {format!r}")
    stem = Path(path)
    if stem.suffix in (".csv", ".json"):
        stem = stem.with_suffix("")
    written = []
    if format in ("csv", "both"):
        p = stem.with_suffix(".csv")
        _atomic_write(p, trace_csv(trace))
        written.append(p)
    if format in ("json", "both"):
        p = stem.with_suffix(".json")
        doc = summary(result, config) if result is not None else trace_summary(trace)
        _atomic_write(p, json.dumps(doc, indent=2, allow_nan=True) + "\n")
        written.append(p)
    return written


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def trace_summary(trace: RunTrace, target=None):
    last = trace.records[-1] if trace.records else None
    doc = {
        "estimator": trace.estimator,
        "epochs": len(trace.records),
        "f0": _num(trace.f0),
        "grad_norm_sq0": _num(trace.grad_norm_sq0),
        "final_f": None if last is None else _num(last.f),
        "final_grad_norm_sq": None if last is None else _num(last.grad_norm_sq),
        "final_ifo": trace.final_ifo,
        "evaluations": trace.evaluations,
        "cap_events": trace.cap_events,
        "x0": [float(v) for v in trace.x0],
    }
    if target is not None:
        doc["target_epsilon"] = target
        doc["ifo_to_target"] = trace.ifo_to_target(target)
    return doc


def summary(result: RunResult, config=None):
    """JSON-ready mirror of a ``RunResult``."""
    doc = {
        "algorithm": result.algorithm,
        "seed": result.seed,
        "output_epoch": result.index,
        "x": [float(v) for v in result.x],
        "ifo_to_target": result.ifo_to_target,
        "wall_clock": result.wall_clock,
    }
    target = getattr(config, "target_epsilon", None)
    doc.update(trace_summary(result.trace, target))
    doc["ifo_to_target"] = result.ifo_to_target
    if config is not None:
        doc["label"] = config.label
        doc["problem"] = config.problem.to_dict()
    return doc


def read_trace_csv(path):
    """Parse a trace CSV back into ``EpochRecord`` objects."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected header {header}")
            records = []
            for row in reader:
                vals = {}
                for name, text in zip(CSV_COLUMNS, row):
                    if name in _INT_COLUMNS:
                        vals[name] = int(text)
                    elif name in _STR_COLUMNS:
                        vals[name] = text
                    else:
                        vals[name] = float(text)
                vals["lam"] = vals.pop("lambda")
                records.append(EpochRecord(**vals))
            return records
    except OSError as err:
        raise OSError(f"cannot read {path}: {err.strerror or err}") from err


# --- comparison tables ------------------------------------------------------

TABLE_COLUMNS = ("label", "seeds", "reached", "ifo_median", "ifo_q25", "ifo_q75",
                 "final_grad_norm_sq_median", "wall_clock_median")


@dataclass
class ComparisonRow:
    label: str
    seeds: int
    reached: int
    ifo_median: float | None
    ifo_q25: float | None
    ifo_q75: float | None
    final_grad_norm_sq_median: float | None
    wall_clock_median: float | None

    def as_dict(self):
        return {k: getattr(self, k) for k in TABLE_COLUMNS}


def _quantile(values, q):
    """Linear-interpolated quantile; unreached cells are ``inf`` and yield ``None``."""
    if not values:
        return None
    v = sorted(values)
    pos = q * (len(v) - 1)
    lo, hi = math.floor(pos), math.ceil(pos)
    if not (math.isfinite(v[lo]) and math.isfinite(v[hi])):
        return None
    return float(v[lo] + (v[hi] - v[lo]) * (pos - lo))


def cell_stem(out_dir, label, seed):
    return Path(out_dir) / label / f"seed{seed}"


def comparison_row(label, stems, target):
    """Summarize one algorithm's persisted traces; ``target`` sets IFO-to-target."""
    ifo, final, wall = [], [], []
    for stem in stems:
        records = read_trace_csv(Path(stem).with_suffix(".csv"))
        hit = next((r.ifo for r in records if r.grad_norm_sq <= target), None)
        ifo.append(math.inf if hit is None else hit)
        if records:
            final.append(records[-1].grad_norm_sq)
        js = Path(stem).with_suffix(".json")
        if js.exists():
            w = json.loads(js.read_text()).get("wall_clock")
            if w is not None:
                wall.append(w)
    return ComparisonRow(
        label, len(stems), sum(math.isfinite(v) for v in ifo),
        _quantile(ifo, 0.5), _quantile(ifo, 0.25), _quantile(ifo, 0.75),
        float(np.median(final)) if final else None,
        float(np.median(wall)) if wall else None,
    )


def comparison_table(out_dir, labels, seeds_by_label, target):
    return [comparison_row(lab, [cell_stem(out_dir, lab, s) for s in seeds_by_label[lab]],
                           target) for lab in labels]


def table_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow(["unreached" if v is None and k.startswith("ifo") else
                    ("" if v is None else _fmt(v)) for k, v in r.as_dict().items()])
    return buf.getvalue()


def write_table(rows, out_dir, target):
    out_dir = Path(out_dir)
    _atomic_write(out_dir / "comparison.csv", table_csv(rows))
    doc = {"target_epsilon": target, "rows": [r.as_dict() for r in rows]}
    _atomic_write(out_dir / "comparison.json", json.dumps(doc, indent=2) + "\n")
    return out_dir / "comparison.csv", out_dir / "comparison.json"


def format_table(rows):
    """Fixed-width text rendering for the terminal."""
    head = f"{'label':<16}{'reached':>9}{'median IFO':>14}{'IQR':>22}{'final |g|^2':>14}{'wall s':>9}"
    lines = [head]
    for r in rows:
        med = "unreached" if r.ifo_median is None else f"{r.ifo_median:.0f}"
        lo = "-" if r.ifo_q25 is None else f"{r.ifo_q25:.0f}"
        hi = "inf" if r.ifo_q75 is None else f"{r.ifo_q75:.0f}"
        fin = "-" if r.final_grad_norm_sq_median is None else f"{r.final_grad_norm_sq_median:.3e}"
        wall = "-" if r.wall_clock_median is None else f"{r.wall_clock_median:.2f}"
        lines.append(f"{r.label:<16}{f'{r.reached}/{r.seeds}':>9}{med:>14}"
                     f"{f'[{lo}, {hi}]':>22}{fin:>14}{wall:>9}")
    return "\n".join(lines)

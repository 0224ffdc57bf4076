"""Run (algorithm, seed) cells and assemble comparison tables."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..errors import DivergenceError
from ..optimizers import RunConfig, run
from . import io as bio

log = logging.getLogger(__name__)


@dataclass
class CellOutcome:
    label: str
    seed: int
    stem: str
    diverged: bool = False
    message: str = ""
    ifo_to_target: int | None = None


def run_cell(label, cfg: RunConfig, out_dir, format="both", obj=None) -> CellOutcome:
    """Execute one run and persist its trace; divergence leaves a partial trace."""
    stem = bio.cell_stem(out_dir, label, cfg.seed)
    try:
        result = run(cfg, obj)
    except DivergenceError as err:
        trace = err.trace
        if trace is not None:
            bio.emit_trace(trace, stem, "csv")
            doc = bio.trace_summary(trace, cfg.target_epsilon)
            doc.update(algorithm=cfg.algorithm, seed=cfg.seed, label=label,
                       diverged=True, message=str(err))
            bio._atomic_write(stem.with_suffix(".json"), json.dumps(doc, indent=2) + "\n")
        log.warning("%s seed %d diverged: %s", label, cfg.seed, err)
        return CellOutcome(label, cfg.seed, str(stem), True, str(err))
    bio.emit_trace(result.trace, stem, format, result=result, config=cfg)
    return CellOutcome(label, cfg.seed, str(stem), ifo_to_target=result.ifo_to_target)


def _cell_job(args):
    return run_cell(*args)


def run_bench(bench, out_dir=None, jobs=None, format=None):
    """Run every cell of ``bench``, then rebuild the table from the written traces.

    Returns ``(rows, outcomes)``. Traces are always written as CSV since the
    table is computed from them.
    """
    out_dir = bench.out if out_dir is None else out_dir
    jobs = bench.jobs if jobs is None else jobs
    format = bench.format if format is None else format
    if format == "json":
        format = "both"
    labels = bench.labels
    cells = bench.cells()
    args = [(label, cfg, out_dir, format) for label, cfg in cells]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_cell_job, args))
    else:
        outcomes = [_cell_job(a) for a in args]

    seeds = {lab: [] for lab in labels}
    for label, cfg in cells:
        seeds[label].append(cfg.seed)
    target = bench.target_epsilon
    if target is None:
        target = cells[0][1].target_epsilon
    rows = bio.comparison_table(out_dir, labels, seeds, target)
    bio.write_table(rows, out_dir, target)
    return rows, outcomes

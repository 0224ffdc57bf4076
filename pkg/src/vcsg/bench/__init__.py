"""Benchmark harness: config loading, orchestration, persistence, CLI."""
from .config import BenchConfig, load_config, parse_config
from .io import comparison_table, emit_trace, read_trace_csv
from .runner import run_bench, run_cell

__all__ = ["BenchConfig", "comparison_table", "emit_trace", "load_config", "parse_config",
           "read_trace_csv", "run_bench", "run_cell"]

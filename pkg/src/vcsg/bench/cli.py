"""Command-line entry point: ``vcsg {run,compare,analyze,problems}``.

Exit status is 0 on success, 1 on a configuration error and 2 when a run
diverges.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .. import analysis
from ..errors import ConfigError, DivergenceError, DomainError
from ..oracle import PROBLEM_DEFAULTS, PROBLEM_DESCRIPTIONS
from . import io as bio
from .config import FORMATS, load_config
from .runner import run_bench, run_cell

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="vcsg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a single run config")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--seed", type=int, default=None, help="override the run seed")
    r.add_argument("--out", default=None, metavar="DIR")
    r.add_argument("--format", choices=FORMATS, default=None)

    c = sub.add_parser("compare", help="run algorithms x seeds and tabulate")
    c.add_argument("--config", required=True, metavar="PATH")
    c.add_argument("--seed", type=int, default=None, help="run only this seed")
    c.add_argument("--out", default=None, metavar="DIR")
    c.add_argument("--jobs", type=int, default=None, metavar="N")
    c.add_argument("--format", choices=FORMATS, default=None)

    a = sub.add_parser("analyze", help="evaluate the bound calculators")
    a.add_argument("--config", default=None, metavar="PATH",
                   help="JSON object of BoundInputs fields")
    a.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one BoundInputs field")

    sub.add_parser("problems", help="list built-in problems")
    return p


def _cmd_run(args):
    bench = load_config(args.config)
    if len(bench.runs) != 1:
        raise ConfigError(f"{args.config}: 'run' expects a single run, got {len(bench.runs)}")
    label, cfg = bench.cells()[0]
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    out = args.out or bench.out
    outcome = run_cell(label, cfg, out, args.format or bench.format)
    if outcome.diverged:
        print(f"diverged: {outcome.message}", file=sys.stderr)
        return EXIT_DIVERGED
    reached = "unreached" if outcome.ifo_to_target is None else outcome.ifo_to_target
    print(f"{label} seed {cfg.seed}: IFO-to-target {reached}; wrote {outcome.stem}.*")
    return EXIT_OK


def _cmd_compare(args):
    bench = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        bench = replace(bench, seeds=(args.seed,))
    if args.jobs is not None and args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = args.out or bench.out
    rows, outcomes = run_bench(bench, out, args.jobs, args.format)
    print(bio.format_table(rows))
    print(f"wrote {out}/comparison.csv and {out}/comparison.json")
    bad = [o for o in outcomes if o.diverged]
    for o in bad:
        print(f"diverged: {o.label} seed {o.seed}: {o.message}", file=sys.stderr)
    return EXIT_DIVERGED if bad else EXIT_OK


def _coerce(name, text):
    kinds = {f.name: f.type for f in fields(analysis.BoundInputs)}
    if name not in kinds:
        raise ConfigError(f"unknown BoundInputs field {name!r}")
    try:
        return int(text) if kinds[name] == "int" else float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as a number") from None


def _cmd_analyze(args):
    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except OSError as err:
            raise ConfigError(f"{args.config}: {err.strerror or err}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"{args.config}:{err.lineno}:{err.colno}: {err.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        doc[key.strip()] = value.strip()
    doc = {k: _coerce(k, v) for k, v in doc.items()}
    try:
        inp = analysis.BoundInputs(**doc)
    except DomainError as err:
        raise ConfigError(str(err)) from None
    report = analysis.analyze(inp)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _cmd_problems(args):
    for kind, desc in PROBLEM_DESCRIPTIONS.items():
        params = ", ".join(f"{k}={v}" for k, v in PROBLEM_DEFAULTS[kind].items())
        print(f"{kind:<26}{desc}")
        print(f"{'':<26}params: {params}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "analyze": _cmd_analyze,
            "problems": _cmd_problems}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command line entry point: ``nmm run|check|gen-data``."""

from __future__ import annotations

import argparse
import sys

from . import datasets
from .checks import run_checks
from .experiment import ConfigError, format_table, parse_config, run_experiment
from .rmtr import NumericalAbort

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(cfg)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"problem {cfg.problem}, {len(cfg.seeds)} seeds, cost in work units")
    print(format_table(summary))
    print(f"wrote {cfg.out}/summary.csv")
    return EXIT_OK


def cmd_check(args) -> int:
    ok = True
    for name, passed, detail in run_checks(args.seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_gen_data(args) -> int:
    try:
        data = datasets.generate(args.dataset, args.n, args.seed)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    datasets.save_csv(data, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a key=value config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("check", help="run invariant and oracle checks on all problem families")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("gen-data", help="write a synthetic dataset as CSV (x1,x2,label)")
    p.add_argument("dataset", choices=sorted(datasets.GENERATORS))
    p.add_argument("n", type=int)
    p.add_argument("seed", type=int)
    p.add_argument("out")
    p.set_defaults(func=cmd_gen_data)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

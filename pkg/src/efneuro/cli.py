"""Command-line entry point.

Subcommands: simulate, continue, rare, meanfield, net-stats. Every command
reads one config file and writes plot-ready tables into the output
directory; all seeds are explicit in the config, so re-running a command
reproduces its outputs byte for byte. Exit codes: 0 success, 1 config
error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

from ._kernels import set_threads
from .config import ConfigError, load_config
from .continuation import NewtonConvergenceError
from .drivers import (NumericalFailure, run_continue, run_meanfield,
                      run_net_stats, run_rare, run_simulate)
from .krylov import EigenSolveError

_COMMANDS = {
    "simulate": run_simulate,
    "continue": run_continue,
    "rare": run_rare,
    "meanfield": run_meanfield,
    "net-stats": run_net_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efneuro",
        description="Coarse-grained analysis of stochastic majority-rule "
                    "neuronal dynamics on random networks")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "temporal evolution of the density observables",
        "continue": "trace coarse equilibrium branches and locate bifurcations",
        "rare": "Fokker-Planck reconstruction and mean escape time",
        "meanfield": "closed-form mean-field diagram and comparison report",
        "net-stats": "degree histogram, clustering and path-length statistics",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", default=None,
                        help="output directory (overrides [output] directory)")
        sp.add_argument("--threads", type=int, default=None,
                        help="cap worker threads (results are identical for any cap)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    set_threads(args.threads)
    outdir = args.out if args.out is not None else cfg.output.directory
    os.makedirs(outdir, exist_ok=True)
    try:
        _COMMANDS[args.command](cfg, outdir)
    except NumericalFailure as exc:
        print(f"numerical failure at stage '{exc.stage}': {exc.cause}",
              file=sys.stderr)
        return 2
    except (NewtonConvergenceError, EigenSolveError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

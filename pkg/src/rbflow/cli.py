"""Command-line entry point.

    solver run <experiment> [--config FILE] [--seed U64] [--out DIR]
                            [--epochs N] [--no-adaptive]
    solver list
    solver verify <run-dir>

Precedence for run settings: built-in experiment defaults, then the config
file, then explicit flags.  SOLVER_THREADS caps the BLAS thread pools (set
before the numerics are imported).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys


def _apply_thread_env():
    threads = os.environ.get("SOLVER_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solver",
                                     description="mesh-free neural-ODE solver experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("experiment", help="experiment id (see 'solver list')")
    run_p.add_argument("--config", help="INI config file", default=None)
    run_p.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--epochs", type=int, default=None, help="override epoch count")
    run_p.add_argument("--no-adaptive", action="store_true",
                       help="freeze centers and scales (coefficients still evolve)")

    sub.add_parser("list", help="list runnable experiment ids")

    verify_p = sub.add_parser("verify", help="re-check a run's artifact hashes")
    verify_p.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    args = _build_parser().parse_args(argv)

    from . import experiments
    from .config import ConfigError, default_config, load_config

    if args.command == "list":
        for name in experiments.list_experiments():
            print(f"{name:16s} {experiments.DESCRIPTIONS[name]}")
        return 0

    if args.command == "verify":
        problems = experiments.verify_run(args.run_dir)
        if problems:
            for msg in problems:
                print(f"FAIL: {msg}", file=sys.stderr)
            return 1
        print("ok: artifact hashes match")
        return 0

    try:
        cfg = default_config(args.experiment)
        if args.config:
            cfg = load_config(args.config, base=cfg)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed,
                                      train=dataclasses.replace(cfg.train, seed=args.seed))
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out=args.out)
        train = cfg.train
        if args.epochs is not None:
            train = dataclasses.replace(train, epochs=args.epochs)
        if args.no_adaptive:
            train = dataclasses.replace(train, adaptive=False)
        cfg = dataclasses.replace(cfg, train=train)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    record = experiments.run(cfg)
    print(f"run complete: {record.out_dir}")
    print(f"  metrics: {record.metrics_csv}")
    for name in record.plots:
        print(f"  plot: {name}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

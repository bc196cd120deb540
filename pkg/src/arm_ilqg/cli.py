"""Command-line interface: run single sessions, parameter sweeps, and the
LQR oracle self-test."""

import argparse
import dataclasses
import os
import sys

from .errors import ConfigError
from .harness import (
    SessionConfig,
    SweepConfig,
    load_config,
    lqr_selfcheck,
    run_session,
    run_sweep,
    session_csv,
    session_json,
    sweep_csv,
    sweep_json,
)


def _add_common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--out", help="output directory (default: stdout only)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="arm-ilqg",
        description="KL-constrained iterative LQG on a simulated 7-DOF arm",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a single learning session")
    _add_common(run)
    sweep = sub.add_parser("sweep", help="run the parameter grid")
    _add_common(sweep)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel cell workers")
    check = sub.add_parser("lqr-check", help="oracle self-test")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--count", type=int, default=20)
    return parser


def _write(out_dir, name, text):
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def cmd_run(args):
    cfg = load_config(args.config) if args.config else SessionConfig()
    if isinstance(cfg, SweepConfig):
        raise ConfigError("config file describes a sweep; use the sweep command")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    result = run_session(cfg)
    text = session_csv(result) if args.format == "csv" else session_json(result)
    _write(args.out, f"session.{args.format}", text)
    if result.converged:
        print(f"converged at iteration {result.converged_at}", file=sys.stderr)
    else:
        print(f"remaining distance {result.remaining_mm:.4f} mm", file=sys.stderr)
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config) if args.config else SweepConfig()
    if isinstance(cfg, SessionConfig):
        cfg = SweepConfig(base=cfg)
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, base=dataclasses.replace(cfg.base, seed=args.seed)
        )

    def progress(done, total, row):
        print(
            f"[{done}/{total}] cov={row.cov_ini:g} v={row.v:g} a={row.alpha:g} "
            f"eps={row.epsilon_ini:g}: {row.outcome}",
            file=sys.stderr,
        )

    result = run_sweep(cfg, jobs=args.jobs, progress=progress)
    text = sweep_csv(result) if args.format == "csv" else sweep_json(result)
    _write(args.out, f"sweep.{args.format}", text)
    return 0


def cmd_lqr_check(args):
    ok, worst = lqr_selfcheck(seed=args.seed, count=args.count)
    status = "PASS" if ok else "FAIL"
    print(f"lqr-check {status}: max relative gain error {worst:.3e} over {args.count} fixtures")
    return 0 if ok else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_lqr_check(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    blab <command> [--config PATH] [--seed S] [--out DIR] [--budget N]
                   [--dim n] [--plot] [--grid-file PATH]

Config files are plain key=value text; command-line flags override file
values.  Exit status: 0 when every assertion passed, 1 on assertion
failure, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ExperimentConfig, parse_config_file
from .experiments import COMMANDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blab",
        description="Numerical experiments on commutators of the Bergman projection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--budget", type=int, help="Monte Carlo budget per estimate")
        p.add_argument("--dim", type=int, help="complex dimension n")
        p.add_argument("--plot", action="store_true", help="also write SVG figures")
        p.add_argument("--grid-file", dest="grid_file", help="load/store the dyadic grid")
    return parser


def config_from_args(args) -> ExperimentConfig:
    overrides = {"command": args.command}
    if args.config:
        overrides.update(parse_config_file(args.config))
    for key in ("seed", "out", "budget", "dim", "grid_file"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.plot:
        overrides["plot"] = True
    return ExperimentConfig(**overrides).resolved()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _, log = COMMANDS[args.command](config)
    for name, status, detail in log.rows():
        print(f"[{status}] {name}: {detail}")
    if log.all_passed:
        print(f"{args.command}: all {len(log.entries)} assertions passed")
        return 0
    failed = sum(1 for _, ok, _ in log.entries if not ok)
    print(f"{args.command}: {failed} assertion(s) FAILED", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""``mmcache run <experiment>`` command-line entry point."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .analytics import PSI_MODES
from .config import ConfigError, ParamValidationError, parse_params
from .experiments import EXPERIMENTS, ExperimentSpec, UsageError, run_experiment

DEFAULT_XI = 0.4  # used only when a config file leaves xi out; sweeps override it


def _list(kind):
    def parse(text: str):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmcache", description="Device-caching mmWave experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write CSV tables")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", type=Path, help="key = value parameter file")
    run.add_argument("--drops", type=int, help="Monte-Carlo drops per simulated point")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--jobs", type=int, default=1, help="worker processes per campaign")
    run.add_argument("--out", type=Path, default=Path("results"),
                     help="output directory (MMCACHE_OUT takes precedence)")
    run.add_argument("--K", type=_list(int), help="cache sizes, e.g. 50,100,200")
    run.add_argument("--delta", type=_list(float), help="paired fractions")
    run.add_argument("--xi", type=_list(float), help="popularity exponents")
    run.add_argument("--psi-mode", choices=PSI_MODES, default="random")
    run.add_argument("--k-order", type=int, default=2, help="order of the LOS surrogate")
    return parser


def cli_parse(argv=None) -> ExperimentSpec:
    parser = build_parser()
    args = parser.parse_args(argv)
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
    try:
        try:
            base = parse_params(text)
        except ParamValidationError as exc:
            if exc.field != "xi" or "mandatory" not in str(exc):
                raise
            base = parse_params(text, xi=DEFAULT_XI)
    except (ConfigError, ParamValidationError) as exc:
        parser.error(f"invalid config: {exc}")
    sweep = {k: v for k, v in (("K", args.K), ("delta", args.delta), ("xi", args.xi)) if v is not None}
    out = Path(os.environ.get("MMCACHE_OUT") or args.out)
    try:
        return ExperimentSpec(args.experiment, base, sweep, args.drops, args.seed, out,
                              args.jobs, args.psi_mode, args.k_order)
    except UsageError as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    spec = cli_parse(argv)
    try:
        paths = run_experiment(spec)
    except OSError as exc:
        print(f"mmcache: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

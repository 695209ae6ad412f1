"""Run every figure experiment in sequence and write the tables to one directory.

Usage: python3 scripts/reproduce_figures.py [--out DIR] [--drops N] [--jobs N] [--seed S]

Without --drops each experiment uses its own default drop count, which
takes hours on a single core for the rate and delay figures.
"""
import argparse
import sys
import time

from mmcache.cli import main
from mmcache.experiments import EXPERIMENTS


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--drops", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", nargs="*", choices=EXPERIMENTS, help="subset of experiments")
    args = ap.parse_args(argv)
    for name in args.only or [e for e in EXPERIMENTS if e != "validate"]:
        cmd = ["run", name, "--out", args.out, "--jobs", str(args.jobs), "--seed", str(args.seed)]
        if args.drops is not None:
            cmd += ["--drops", str(args.drops)]
        t0 = time.perf_counter()
        code = main(cmd)
        print(f"# {name}: {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())

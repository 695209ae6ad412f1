"""Print analytic-vs-simulation gaps at one operating point.

Usage: python3 scripts/run_validation.py [--drops N] [--K 200] [--xi 0.4] [--delta 1]
"""
import argparse
import sys

from mmcache.config import SystemParams
from mmcache.experiments import validation_checks


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--drops", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--K", type=int, default=200)
    ap.add_argument("--xi", type=float, default=0.4)
    ap.add_argument("--delta", type=float, default=1.0)
    args = ap.parse_args(argv)
    p = SystemParams(xi=args.xi, cache_size=args.K, delta=args.delta)
    checks = validation_checks(p, args.drops, args.seed, args.jobs)
    width = max(len(c.name) for c in checks)
    for c in checks:
        flag = "ok  " if c.passed else "over"
        note = f"  ({c.note})" if c.note else ""
        print(f"{flag} {c.name:<{width}}  {c.value:.4g}  tol {c.tolerance:g}{note}")
    return 0


if __name__ == "__main__":
    sys.exit(run())

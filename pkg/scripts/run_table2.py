#!/usr/bin/env python3
"""Empirical power of the eigenspace test when the hypothesized direction
is wrong.

Runs the 18-cell alternative grid (d2 in {10,100} x c in {0.1,1,2} x
n in {100,200,500}): the data are generated with the spike on e4 while the
test asserts e1. Same knobs as run_table1.py:

    python scripts/run_table2.py --cell d2=10,c=0.1,n=200 --fast
"""

import argparse
import sys

from spikeproj.cli import main


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cell", default=None, help="single cell, e.g. d2=10,c=0.1,n=200")
    ap.add_argument("--seed", type=int, default=20260115)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="optional per-cell report directory")
    ap.add_argument("--fast", action="store_true", help="R=500 instead of 2000")
    args = ap.parse_args()

    argv = ["reproduce-table2", "--seed", str(args.seed), "--workers", str(args.workers)]
    if args.cell:
        argv += ["--cell", args.cell]
    if args.out:
        argv += ["--output", args.out]
    if args.fast:
        argv.append("--fast")
    sys.exit(main(argv))

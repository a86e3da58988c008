#!/usr/bin/env python3
"""Empirical size of the eigenspace test over the null simulation grid.

Runs the 24-cell grid (d2 in {5,10,50,100} x c in {0.1,1,2} x n in {200,500})
at nominal level 0.05 and prints one row per cell with the recorded
comparison rate. Warning: the full grid at R=2000 includes p=1000 cells and
takes hours on one core. For a quick look, pick a cell:

    python scripts/run_table1.py --cell d2=5,c=0.1,n=200 --fast
"""

import argparse
import sys

from spikeproj.cli import main


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cell", default=None, help="single cell, e.g. d2=5,c=0.1,n=200")
    ap.add_argument("--seed", type=int, default=20260101)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="optional per-cell report directory")
    ap.add_argument("--fast", action="store_true", help="R=500 instead of 2000")
    args = ap.parse_args()

    argv = ["reproduce-table1", "--seed", str(args.seed), "--workers", str(args.workers)]
    if args.cell:
        argv += ["--cell", args.cell]
    if args.out:
        argv += ["--output", args.out]
    if args.fast:
        argv.append("--fast")
    sys.exit(main(argv))

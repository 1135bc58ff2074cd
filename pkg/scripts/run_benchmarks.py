#!/usr/bin/env python3
"""Reproduce the two benchmark studies and a refinement trace.

Writes results/wdbc/ and results/digits/ (comparison reports) plus
results/trace/ (per-iteration refinement log).  Expects the CSVs from
scripts/make_datasets.py; pass a different data directory as argv[1]
and a different output root as argv[2].
"""
from __future__ import annotations

import os
import sys

from rrf.cli import main as rrf_main


def run(args: list[str]) -> None:
    print("$ rrf " + " ".join(args))
    code = rrf_main(args)
    if code != 0:
        raise SystemExit(code)


def main() -> int:
    data_dir = sys.argv[1] if len(sys.argv) > 1 else "data"
    out_root = sys.argv[2] if len(sys.argv) > 2 else "results"
    wdbc = os.path.join(data_dir, "wdbc.csv")
    digits = os.path.join(data_dir, "optdigits.csv")

    run([
        "compare", "--data", wdbc, "--label", "label",
        "--repeats", "10", "--t0", "20", "--seed", "0",
        "--out", os.path.join(out_root, "wdbc"),
    ])
    run([
        "compare", "--data", digits, "--label", "label",
        "--repeats", "5", "--subsample", "1500", "--max-iterations", "5",
        "--seed", "0", "--out", os.path.join(out_root, "digits"),
    ])
    run([
        "refine", "--data", wdbc, "--label", "label",
        "--t0", "20", "--seed", "0",
        "--out", os.path.join(out_root, "trace"),
    ])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Write the benchmark CSVs (WDBC and the 8x8 digits) into data/.

Both datasets ship with scikit-learn, so this needs no network access.
"""
from __future__ import annotations

import csv
import os
import sys

from sklearn.datasets import load_breast_cancer, load_digits


def write_csv(path: str, rows, labels, feature_names, class_names) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(feature_names) + ["label"])
        for row, label in zip(rows, labels):
            writer.writerow([repr(float(x)) for x in row] + [class_names[label]])


def write_wdbc(path: str) -> None:
    bunch = load_breast_cancer()
    names = [n.replace(" ", "_") for n in bunch.feature_names]
    write_csv(path, bunch.data, bunch.target, names, list(bunch.target_names))


def write_digits(path: str) -> None:
    bunch = load_digits()
    names = [f"px{i:02d}" for i in range(bunch.data.shape[1])]
    write_csv(path, bunch.data, bunch.target, names, [f"d{c}" for c in bunch.target_names])


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "data"
    wdbc = os.path.join(out_dir, "wdbc.csv")
    digits = os.path.join(out_dir, "optdigits.csv")
    write_wdbc(wdbc)
    write_digits(digits)
    print(f"wrote {wdbc} and {digits}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

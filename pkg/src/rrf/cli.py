"""Benchmark harness: standard-RF-vs-refined-forest comparison studies.

Subcommands:

* ``compare`` — for each repeat: split, refine, prune, then train a
  baseline forest with the same final tree count on all features, and
  evaluate both on the untouched test split.
* ``refine`` — one refinement run; emits the per-iteration trace CSV.
* ``growthmath`` — evaluate the growth-bound quantities for given inputs.

Exit codes: 0 success, 1 usage/config error, 2 data/IO error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .data import DataError, Dataset, SplitSpec, load_csv, stratified_split
from .diversity import (
    DEFAULT_CORRELATION_THRESHOLD,
    DiversityError,
    pearson_matrix,
    prediction_matrix,
    prune_correlated,
)
from .forest import ForestError, forest_predict_proba_matrix, train_forest
from .metrics import MetricError, evaluate
from .refine import (
    DEFAULT_INITIAL_TREES,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TREES_ADDED_CAP,
    GrowthParams,
    RefineConfig,
    RefineError,
    TRACE_CSV_COLUMNS,
    growth_quantities,
    refine,
    trace_csv_rows,
)
from .seeds import derive_seed
from .tree import TreeError

# Stage index deriving the row-subsampling seed from the master seed.
_SUBSAMPLE_STAGE = 101


class UsageError(Exception):
    """Bad flags or config file contents (exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    label_column: str
    train_fraction: float = 0.6
    valid_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0
    repeats: int = 1
    initial_trees: int = DEFAULT_INITIAL_TREES
    min_leaf: int = 1
    correlation_threshold: float = DEFAULT_CORRELATION_THRESHOLD
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    trees_added_cap: int = DEFAULT_TREES_ADDED_CAP
    subsample: int | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise UsageError("repeats must be >= 1")
        if not 0.0 < self.correlation_threshold <= 1.0:
            raise UsageError("correlation threshold must lie in (0, 1]")
        if self.initial_trees < 1:
            raise UsageError("t0 must be >= 1")
        if self.min_leaf < 1:
            raise UsageError("min-leaf must be >= 1")
        if self.max_iterations < 0:
            raise UsageError("max-iterations must be >= 0")
        if self.trees_added_cap < 0:
            raise UsageError("delta-b-cap must be >= 0")
        if self.subsample is not None and self.subsample < 1:
            raise UsageError("subsample must be >= 1")

    @property
    def split_spec_fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.valid_fraction, self.test_fraction)


@dataclass(frozen=True)
class RepeatRecord:
    seed: int
    rf_accuracy: float
    rf_auc: float
    rrf_accuracy: float
    rrf_auc: float
    trees_before_pruning: int
    trees_after_pruning: int
    iterations: int


@dataclass(frozen=True)
class ComparisonReport:
    config: RunConfig
    records: tuple[RepeatRecord, ...]
    aggregates: dict
    corr_before: np.ndarray  # final repeat, pre-pruning
    corr_after: np.ndarray   # final repeat, post-pruning


_AGGREGATE_FIELDS = (
    "rf_accuracy",
    "rf_auc",
    "rrf_accuracy",
    "rrf_auc",
    "trees_before_pruning",
    "trees_after_pruning",
    "iterations",
)


def _subsampled(dataset: Dataset, cap: int | None, master_seed: int) -> Dataset:
    if cap is None or dataset.n_samples <= cap:
        return dataset
    rng = np.random.default_rng(derive_seed(master_seed, _SUBSAMPLE_STAGE))
    keep = np.sort(rng.choice(dataset.n_samples, size=cap, replace=False))
    return dataset.take(keep)


def run_comparison(config: RunConfig) -> ComparisonReport:
    """The full study: refine + prune vs. an equal-size standard forest."""
    dataset = _subsampled(load_csv(config.dataset_path, config.label_column), config.subsample, config.seed)
    subset_size = int(math.isqrt(dataset.n_features))
    records = []
    corr_before = corr_after = None
    for r in range(config.repeats):
        seed_r = derive_seed(config.seed, r)
        split = SplitSpec(
            config.train_fraction, config.valid_fraction, config.test_fraction, seed=derive_seed(seed_r, 0)
        )
        train, valid, test = stratified_split(dataset, split)
        refine_config = RefineConfig(
            initial_trees=config.initial_trees,
            min_leaf=config.min_leaf,
            max_iterations=config.max_iterations,
            trees_added_cap=config.trees_added_cap,
            seed=derive_seed(seed_r, 1),
        )
        refined, traces = refine(train, valid, refine_config)
        pruned, pruning = prune_correlated(refined, valid, config.correlation_threshold)

        baseline = train_forest(
            train,
            tuple(range(dataset.n_features)),
            pruned.n_trees,
            subset_size,
            config.min_leaf,
            derive_seed(seed_r, 2),
        )
        assert baseline.n_trees == pruned.n_trees, "comparison must use equal tree counts"

        rf_report = evaluate(forest_predict_proba_matrix(baseline, test.rows), test.labels)
        rrf_report = evaluate(forest_predict_proba_matrix(pruned, test.rows), test.labels)
        records.append(
            RepeatRecord(
                seed=seed_r,
                rf_accuracy=rf_report.accuracy,
                rf_auc=rf_report.auc,
                rrf_accuracy=rrf_report.accuracy,
                rrf_auc=rrf_report.auc,
                trees_before_pruning=refined.n_trees,
                trees_after_pruning=pruned.n_trees,
                iterations=len(traces),
            )
        )
        if r == config.repeats - 1:
            corr_before = pruning.correlation
            corr_after = pearson_matrix(prediction_matrix(pruned, valid))

    aggregates = {
        field: {
            "mean": float(np.mean([getattr(rec, field) for rec in records])),
            "std": float(np.std([getattr(rec, field) for rec in records])),
        }
        for field in _AGGREGATE_FIELDS
    }
    return ComparisonReport(
        config=config,
        records=tuple(records),
        aggregates=aggregates,
        corr_before=corr_before,
        corr_after=corr_after,
    )


def _write_matrix_csv(path: str, matrix: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix, dtype=np.float64):
            writer.writerow([f"{x:.6f}" for x in row])


def report_json_payload(report: ComparisonReport) -> dict:
    return {
        "config": asdict(report.config),
        "records": [asdict(rec) for rec in report.records],
        "aggregates": report.aggregates,
    }


def emit_report(report: ComparisonReport, out_dir: str) -> list[str]:
    """Write report.json, summary.csv, and the two correlation CSVs."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_json_payload(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)

    agg = report.aggregates
    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "dataset",
                "repeats",
                "rf_accuracy_mean",
                "rf_accuracy_std",
                "rrf_accuracy_mean",
                "rrf_accuracy_std",
                "rf_auc_mean",
                "rf_auc_std",
                "rrf_auc_mean",
                "rrf_auc_std",
                "trees_before_mean",
                "trees_after_mean",
            ]
        )
        writer.writerow(
            [
                os.path.basename(report.config.dataset_path),
                report.config.repeats,
                f"{agg['rf_accuracy']['mean']:.6f}",
                f"{agg['rf_accuracy']['std']:.6f}",
                f"{agg['rrf_accuracy']['mean']:.6f}",
                f"{agg['rrf_accuracy']['std']:.6f}",
                f"{agg['rf_auc']['mean']:.6f}",
                f"{agg['rf_auc']['std']:.6f}",
                f"{agg['rrf_auc']['mean']:.6f}",
                f"{agg['rrf_auc']['std']:.6f}",
                f"{agg['trees_before_pruning']['mean']:.6f}",
                f"{agg['trees_after_pruning']['mean']:.6f}",
            ]
        )
    paths.append(path)

    for name, matrix in (("corr_before.csv", report.corr_before), ("corr_after.csv", report.corr_after)):
        path = os.path.join(out_dir, name)
        _write_matrix_csv(path, matrix)
        paths.append(path)
    return paths


def run_refine_trace(config: RunConfig, out_dir: str) -> str:
    """One refinement run (repeat 0 of the comparison protocol) plus its trace CSV."""
    dataset = _subsampled(load_csv(config.dataset_path, config.label_column), config.subsample, config.seed)
    seed_r = derive_seed(config.seed, 0)
    split = SplitSpec(
        config.train_fraction, config.valid_fraction, config.test_fraction, seed=derive_seed(seed_r, 0)
    )
    train, valid, _ = stratified_split(dataset, split)
    refine_config = RefineConfig(
        initial_trees=config.initial_trees,
        min_leaf=config.min_leaf,
        max_iterations=config.max_iterations,
        trees_added_cap=config.trees_added_cap,
        seed=derive_seed(seed_r, 1),
    )
    forest, traces = refine(train, valid, refine_config)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "refine_trace.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_COLUMNS)
        writer.writerows(trace_csv_rows(traces))
    print(
        f"refined forest: {forest.n_trees} trees on {len(forest.feature_set)} features "
        f"after {len(traces)} iterations; trace written to {path}"
    )
    return path


def _print_growthmath(args) -> None:
    params = GrowthParams(
        n_important=args.u,
        n_unimportant=args.v,
        subset_size=args.f,
        avg_nodes=args.tav,
        n_trees=args.b,
        delta_important=args.du,
        delta_unimportant=args.dv,
    )
    g = growth_quantities(params, args.delta_b_cap)
    print(f"q = {g.good_split_prob:.6f}")
    print(f"q_u = {g.partial_important:.6f}")
    print(f"q_v = {g.partial_unimportant:.6f}")
    print(f"zeta = {g.strength:.6f}")
    print(f"p = {g.overlap_prob:.6f}")
    print(f"c = {g.correlation:.6f}")
    print(f"eta_c = {g.correlation_term:.6f}")
    print(f"nu = {g.margin_slope:.6f}")
    print(f"delta_b = {g.trees_to_add}")
    if g.degenerate:
        print("note: zero margin slope; growth direction undefined", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_split(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--split expects three comma-separated fractions, e.g. 0.6,0.2,0.2")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad --split value: {exc}") from None


def parse_config_file(path: str) -> dict:
    """Flat key=value config; '#' starts a comment; keys match the CLI flags."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    return values


_CONFIG_KEYS = {
    "data": str,
    "label": str,
    "seed": int,
    "repeats": int,
    "t0": int,
    "th": float,
    "split": str,
    "subsample": int,
    "min_leaf": int,
    "max_iterations": int,
    "delta_b_cap": int,
    "out": str,
}


def _merge_config(args) -> tuple[RunConfig, str]:
    """CLI flags override config-file values, which override defaults."""
    file_values: dict = {}
    if getattr(args, "config", None):
        raw = parse_config_file(args.config)
        unknown = set(raw) - set(_CONFIG_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in raw.items():
            try:
                file_values[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(f"config key {key} has invalid value {value!r}") from None

    def pick(flag, key, default):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        return file_values.get(key, default)

    data = pick("data", "data", None)
    label = pick("label", "label", None)
    if data is None or label is None:
        raise UsageError("--data and --label are required (flag or config file)")
    split = _parse_split(pick("split", "split", "0.6,0.2,0.2"))
    config = RunConfig(
        dataset_path=data,
        label_column=label,
        train_fraction=split[0],
        valid_fraction=split[1],
        test_fraction=split[2],
        seed=pick("seed", "seed", 0),
        repeats=pick("repeats", "repeats", 1),
        initial_trees=pick("t0", "t0", DEFAULT_INITIAL_TREES),
        min_leaf=pick("min_leaf", "min_leaf", 1),
        correlation_threshold=pick("th", "th", DEFAULT_CORRELATION_THRESHOLD),
        max_iterations=pick("max_iterations", "max_iterations", DEFAULT_MAX_ITERATIONS),
        trees_added_cap=pick("delta_b_cap", "delta_b_cap", DEFAULT_TREES_ADDED_CAP),
        subsample=pick("subsample", "subsample", None),
    )
    out_dir = pick("out", "out", "rrf_out")
    return config, out_dir


def _add_run_flags(parser: _Parser) -> None:
    parser.add_argument("--data", help="path to the CSV dataset")
    parser.add_argument("--label", help="name of the label column")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--t0", type=int, help=f"initial tree count (default {DEFAULT_INITIAL_TREES})")
    parser.add_argument("--split", help="train,valid,test fractions (default 0.6,0.2,0.2)")
    parser.add_argument("--subsample", type=int, help="cap the row count before splitting")
    parser.add_argument("--min-leaf", dest="min_leaf", type=int, help="minimum samples per leaf (default 1)")
    parser.add_argument(
        "--max-iterations", dest="max_iterations", type=int,
        help=f"refinement iteration cap (default {DEFAULT_MAX_ITERATIONS})",
    )
    parser.add_argument(
        "--delta-b-cap", dest="delta_b_cap", type=int,
        help=f"per-iteration tree-growth cap (default {DEFAULT_TREES_ADDED_CAP})",
    )
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--out", help="output directory (default rrf_out)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="rrf", description="Refined-random-forest benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    compare = sub.add_parser("compare", help="RF vs refined-forest study", description="RF vs refined-forest study")
    _add_run_flags(compare)
    compare.add_argument("--repeats", type=int, help="number of seeded repeats (default 1)")
    compare.add_argument("--th", type=float, help=f"correlation threshold (default {DEFAULT_CORRELATION_THRESHOLD})")

    ref = sub.add_parser("refine", help="single refinement run; writes the iteration trace")
    _add_run_flags(ref)

    growth = sub.add_parser("growthmath", help="evaluate the tree-growth bound quantities")
    growth.add_argument("--u", type=int, required=True, help="important pool size")
    growth.add_argument("--v", type=int, required=True, help="unimportant pool size")
    growth.add_argument("--f", type=int, required=True, help="per-node feature subset size")
    growth.add_argument("--tav", type=float, required=True, help="average internal nodes per tree")
    growth.add_argument("--b", type=int, required=True, help="current tree count")
    growth.add_argument("--du", type=int, required=True, help="signed change in important pool size")
    growth.add_argument("--dv", type=int, required=True, help="signed change in unimportant pool size")
    growth.add_argument(
        "--delta-b-cap", dest="delta_b_cap", type=int, default=DEFAULT_TREES_ADDED_CAP,
        help=f"cap on the returned increment (default {DEFAULT_TREES_ADDED_CAP})",
    )
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "growthmath":
            _print_growthmath(args)
            return 0
        config, out_dir = _merge_config(args)
        if args.command == "compare":
            report = run_comparison(config)
            paths = emit_report(report, out_dir)
            agg = report.aggregates
            print(
                f"rf accuracy {agg['rf_accuracy']['mean']:.4f} | "
                f"rrf accuracy {agg['rrf_accuracy']['mean']:.4f} | "
                f"trees {agg['trees_before_pruning']['mean']:.1f} -> {agg['trees_after_pruning']['mean']:.1f}"
            )
            for path in paths:
                print(f"wrote {path}")
            return 0
        run_refine_trace(config, out_dir)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (AssertionError, TreeError, ForestError, RefineError, MetricError, DiversityError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

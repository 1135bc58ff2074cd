"""Shared fixtures: benchmark CSVs, seeded refinement runs, hypothesis profile."""

from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rrf.data import SplitSpec, load_csv, stratified_split
from rrf.refine import RefineConfig, refine

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("suite")


def _write_csv(path, feature_names, rows, labels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([*feature_names, "label"]) + "\n")
        for row, lab in zip(rows, labels):
            fh.write(",".join([repr(float(x)) for x in row] + [lab]) + "\n")


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """Benchmark CSVs exported from scikit-learn's bundled copies."""
    from sklearn.datasets import load_breast_cancer, load_digits

    root = tmp_path_factory.mktemp("datasets")

    cancer = load_breast_cancer()
    names = [n.replace(" ", "_") for n in cancer.feature_names]
    labels = [str(cancer.target_names[t]) for t in cancer.target]
    _write_csv(root / "wdbc.csv", names, cancer.data, labels)

    digits = load_digits()
    names = [f"px{i:02d}" for i in range(digits.data.shape[1])]
    labels = [f"d{t}" for t in digits.target]
    _write_csv(root / "optdigits.csv", names, digits.data, labels)
    return root


@pytest.fixture(scope="session")
def wdbc_csv(dataset_dir):
    return str(dataset_dir / "wdbc.csv")


@pytest.fixture(scope="session")
def digits_csv(dataset_dir):
    return str(dataset_dir / "optdigits.csv")


@pytest.fixture(scope="session")
def wdbc(wdbc_csv):
    return load_csv(wdbc_csv, "label")


@pytest.fixture(scope="session")
def wdbc_refine_runs(wdbc):
    """Five seeded refinement runs on the binary benchmark, shared across tests.

    Each entry is (seed, train, valid, final_forest, traces).
    """
    runs = []
    for seed in range(5):
        train, valid, _ = stratified_split(wdbc, SplitSpec(0.6, 0.2, 0.2, seed=seed))
        forest, traces = refine(train, valid, RefineConfig(initial_trees=20, seed=seed))
        runs.append((seed, train, valid, forest, traces))
    return runs


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion at the end of a run."""
    results = None
    for name, module in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            results = getattr(module, "CRITERION_RESULTS", None)
            break
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, description = results[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {description}")

"""CSV ingestion, label encoding, and stratified train/valid/test splits."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class DataError(Exception):
    """Base class for dataset ingestion and splitting failures."""


class MissingLabelColumn(DataError):
    pass


class NonNumericFeature(DataError):
    """A feature cell failed to parse as a float (or was missing)."""

    def __init__(self, row: int, col: str):
        self.row = row
        self.col = col
        super().__init__(f"non-numeric feature value at data row {row}, column {col!r}")


class EmptyDataset(DataError):
    pass


class SingleClass(DataError):
    pass


class ClassTooSmall(DataError):
    def __init__(self, class_name: str, count: int):
        self.class_name = class_name
        self.count = count
        super().__init__(f"class {class_name!r} has only {count} samples; need at least 3 to split")


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix with integer-encoded labels.

    ``class_names`` fixes the label universe: subsets (splits, bootstrap
    samples) keep the full universe even when some class is absent from
    ``labels``, so class indices stay comparable across partitions.
    """

    rows: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        if rows.ndim != 2:
            raise DataError("rows must be a 2-d array")
        if labels.shape != (rows.shape[0],):
            raise DataError("labels must be a vector with one entry per row")
        if rows.shape[1] != len(self.feature_names):
            raise DataError("feature_names must match the number of columns")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature names must be unique")
        if len(self.class_names) < 2:
            raise SingleClass("a dataset needs at least two classes")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DataError("labels must be in [0, n_classes)")

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset (or bootstrap resample) sharing the label universe."""
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.rows[indices], self.labels[indices], self.feature_names, self.class_names)


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for a stratified train/valid/test partition."""

    train_fraction: float = 0.6
    valid_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.valid_fraction, self.test_fraction)
        if any(not 0.0 < fr < 1.0 for fr in fracs):
            raise DataError("split fractions must lie strictly between 0 and 1")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise DataError("split fractions must sum to 1")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.valid_fraction, self.test_fraction)


def load_csv(path, label_column: str) -> Dataset:
    """Load a numeric CSV with a header row and one label column.

    Labels are encoded as integers in order of first appearance.  Any
    missing or non-numeric feature cell is a hard error.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path}: no header row")
        if label_column not in header:
            raise MissingLabelColumn(f"label column {label_column!r} not in header {header}")
        label_ix = header.index(label_column)
        feature_names = tuple(name for i, name in enumerate(header) if i != label_ix)

        rows: list[list[float]] = []
        labels: list[int] = []
        class_ids: dict[str, int] = {}
        for r, record in enumerate(reader):
            if not record:
                continue
            values = []
            for i, name in enumerate(header):
                cell = record[i] if i < len(record) else ""
                if i == label_ix:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericFeature(row=r, col=name) from None
            if np.isnan(values).any():
                bad = int(np.nonzero(np.isnan(values))[0][0])
                raise NonNumericFeature(row=r, col=feature_names[bad])
            label = record[label_ix] if label_ix < len(record) else ""
            labels.append(class_ids.setdefault(label, len(class_ids)))
            rows.append(values)

    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    if len(class_ids) < 2:
        raise SingleClass(f"{path}: found a single label value {next(iter(class_ids))!r}")
    class_names = tuple(sorted(class_ids, key=class_ids.get))
    return Dataset(np.array(rows), np.array(labels), feature_names, class_names)


def _apportion(count: int, fractions: tuple[float, float, float]) -> list[int]:
    """Largest-remainder apportionment of ``count`` items across fractions.

    Each partition receives floor(count * fraction) items; the leftover
    goes one-by-one to the largest fractional remainders, earlier
    partitions (train, then valid, then test) winning ties.  Every
    partition count therefore differs from its exact quota by < 1.
    """
    quotas = [count * fr for fr in fractions]
    base = [int(np.floor(q)) for q in quotas]
    leftover = count - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def stratified_split_indices(
    labels: np.ndarray, n_classes: int, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class shuffled index partition honouring the split fractions.

    Within every class the three partition counts each differ from the
    exact quota by less than one sample.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(spec.seed)
    parts: tuple[list, list, list] = ([], [], [])
    for c in range(n_classes):
        idx = np.nonzero(labels == c)[0]
        if idx.size < 3:
            raise ClassTooSmall(str(c), int(idx.size))
        idx = rng.permutation(idx)
        n_train, n_valid, _ = _apportion(idx.size, spec.fractions)
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train : n_train + n_valid])
        parts[2].append(idx[n_train + n_valid :])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def stratified_split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Split a dataset into stratified train/valid/test subsets."""
    if dataset.n_samples == 0:
        raise EmptyDataset("cannot split an empty dataset")
    train_ix, valid_ix, test_ix = stratified_split_indices(dataset.labels, dataset.n_classes, spec)
    return dataset.take(train_ix), dataset.take(valid_ix), dataset.take(test_ix)

"""CART-style decision tree: entropy splits over random feature subsets.

Split selection maximizes information gain; every internal node also
records the gain ratio of its chosen split (gain divided by parent
entropy), which downstream feature weighting consumes.  Thresholds are
midpoints between consecutive distinct sorted values.  Trees grow until
purity, a minimum leaf size, or gain exhaustion; there is no depth cap.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TreeError(Exception):
    """Base class for tree construction and evaluation failures."""


class AllZeroCounts(TreeError):
    pass


class InconsistentCounts(TreeError):
    pass


class PureParent(TreeError):
    pass


class EmptySample(TreeError):
    pass


class FNotPositive(TreeError):
    pass


class DimensionMismatch(TreeError):
    pass


def entropy(counts) -> float:
    """Shannon entropy (base 2) of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise AllZeroCounts("entropy needs at least one sample")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def info_gain(parent, left, right) -> float:
    """Entropy reduction of splitting ``parent`` counts into two children."""
    parent = np.asarray(parent, dtype=np.float64)
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if not np.array_equal(left + right, parent):
        raise InconsistentCounts("child counts must sum to parent counts")
    n = parent.sum()
    if n <= 0:
        raise AllZeroCounts("info_gain needs at least one sample")
    n_left = left.sum()
    n_right = right.sum()
    h = entropy(parent)
    if n_left > 0:
        h -= (n_left / n) * entropy(left)
    if n_right > 0:
        h -= (n_right / n) * entropy(right)
    return float(h)


def info_gain_ratio(parent, left, right) -> float:
    """Information gain normalized by parent entropy."""
    h = entropy(parent)
    if h == 0.0:
        raise PureParent("gain ratio is undefined for a pure parent")
    return info_gain(parent, left, right) / h


@dataclass(slots=True)
class LeafNode:
    class_distribution: np.ndarray  # (n_classes,) probabilities, sums to 1


@dataclass(slots=True)
class SplitNode:
    feature_index: int
    threshold: float
    gain_ratio: float
    left_class_counts: np.ndarray   # per-class sample counts routed left
    right_class_counts: np.ndarray  # per-class sample counts routed right
    left: object = None
    right: object = None

    @property
    def n_left(self) -> int:
        return int(self.left_class_counts.sum())

    @property
    def n_right(self) -> int:
        return int(self.right_class_counts.sum())

    @property
    def n_parent(self) -> int:
        return self.n_left + self.n_right


@dataclass(slots=True)
class DecisionTree:
    root: object
    n_features: int
    n_classes: int
    n_internal_nodes: int
    feature_subset_size: int
    feature_set_snapshot: tuple[int, ...] = field(default=())


def _entropy_grid(counts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Entropies for a (boundaries, features, classes) count grid."""
    p = counts / sizes[:, None, None]
    safe = np.where(p > 0.0, p, 1.0)
    return -(p * np.log2(safe)).sum(axis=2)


def _best_split(sub: np.ndarray, onehot: np.ndarray, feats: np.ndarray, parent_h: float, min_leaf: int):
    """Best (feature, threshold, gain) over candidate features, or None.

    Ties on gain break to the lowest feature index, then lowest threshold.
    """
    m = sub.shape[0]
    order = np.argsort(sub, axis=0, kind="stable")
    svals = np.take_along_axis(sub, order, axis=0)
    left_counts = np.cumsum(onehot[order], axis=0)[:-1]  # (m-1, f, K)
    total = onehot.sum(axis=0)
    right_counts = total[None, None, :] - left_counts
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    h_left = _entropy_grid(left_counts, n_left)
    h_right = _entropy_grid(right_counts, n_right)
    gain = parent_h - (n_left / m)[:, None] * h_left - (n_right / m)[:, None] * h_right
    valid = svals[:-1] < svals[1:]
    if min_leaf > 1:
        valid &= ((n_left >= min_leaf) & (n_right >= min_leaf))[:, None]
    gain = np.where(valid, gain, -np.inf)
    best = gain.max(initial=-np.inf)
    if not best > 0.0:
        return None
    ii, jj = np.nonzero(gain == best)
    thresholds = (svals[ii, jj] + svals[ii + 1, jj]) / 2.0
    feature_ids = feats[jj]
    k = np.lexsort((thresholds, feature_ids))[0]
    left_vec = left_counts[ii[k], jj[k]].astype(np.int64)
    right_vec = right_counts[ii[k], jj[k]].astype(np.int64)
    return int(feature_ids[k]), float(thresholds[k]), float(best), left_vec, right_vec


def train_tree(sample, available_features, subset_size: int, min_leaf: int, rng) -> DecisionTree:
    """Grow a tree on ``sample`` drawing ``subset_size`` candidate features per node.

    ``rng`` is a ``numpy.random.Generator``; identical inputs and generator
    state reproduce the tree exactly.
    """
    if sample.n_samples < 1:
        raise EmptySample("cannot train a tree on an empty sample")
    if subset_size < 1:
        raise FNotPositive(f"feature subset size must be >= 1, got {subset_size}")
    available = np.asarray(sorted(available_features), dtype=np.intp)
    if available.size == 0 or subset_size > available.size:
        raise FNotPositive(
            f"feature subset size {subset_size} exceeds the {available.size} available features"
        )
    if available.min(initial=0) < 0 or available.max(initial=0) >= sample.n_features:
        raise DimensionMismatch("available features out of range for this sample")

    X = sample.rows
    y = sample.labels
    n, n_classes = sample.n_samples, sample.n_classes
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    min_leaf = max(int(min_leaf), 1)

    tree = DecisionTree(
        root=None,
        n_features=sample.n_features,
        n_classes=n_classes,
        n_internal_nodes=0,
        feature_subset_size=int(subset_size),
        feature_set_snapshot=tuple(int(j) for j in available),
    )

    def attach(parent, is_right, node):
        if parent is None:
            tree.root = node
        elif is_right:
            parent.right = node
        else:
            parent.left = node

    stack = [(np.arange(n, dtype=np.intp), None, False)]
    while stack:
        idx, parent, is_right = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        m = idx.size
        top = counts.max()
        if top == m or m < 2 * min_leaf:
            attach(parent, is_right, LeafNode(class_distribution=counts / m))
            continue
        feats = rng.choice(available, size=subset_size, replace=False)
        parent_h = entropy(counts)
        found = _best_split(X[np.ix_(idx, feats)], onehot[idx], feats, parent_h, min_leaf)
        if found is None:
            attach(parent, is_right, LeafNode(class_distribution=counts / m))
            continue
        feature_index, threshold, gain, left_vec, right_vec = found
        node = SplitNode(
            feature_index=feature_index,
            threshold=threshold,
            gain_ratio=gain / parent_h,
            left_class_counts=left_vec,
            right_class_counts=right_vec,
        )
        tree.n_internal_nodes += 1
        attach(parent, is_right, node)
        mask = X[idx, feature_index] <= threshold
        stack.append((idx[~mask], node, True))
        stack.append((idx[mask], node, False))
    return tree


def predict_proba(tree: DecisionTree, row) -> np.ndarray:
    """Class-probability vector for one row (the leaf distribution it lands in)."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (tree.n_features,):
        raise DimensionMismatch(f"expected a row of length {tree.n_features}, got shape {row.shape}")
    node = tree.root
    while isinstance(node, SplitNode):
        node = node.left if row[node.feature_index] <= node.threshold else node.right
    return node.class_distribution.copy()


def predict_proba_matrix(tree: DecisionTree, rows: np.ndarray) -> np.ndarray:
    """Leaf distributions for every row of a matrix (vectorized routing)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != tree.n_features:
        raise DimensionMismatch(f"expected (n, {tree.n_features}) rows, got shape {rows.shape}")
    out = np.empty((rows.shape[0], tree.n_classes), dtype=np.float64)
    stack = [(tree.root, np.arange(rows.shape[0], dtype=np.intp))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, LeafNode):
            out[idx] = node.class_distribution
            continue
        mask = rows[idx, node.feature_index] <= node.threshold
        left_idx = idx[mask]
        right_idx = idx[~mask]
        if left_idx.size:
            stack.append((node.left, left_idx))
        if right_idx.size:
            stack.append((node.right, right_idx))
    return out


def iter_split_nodes(tree: DecisionTree):
    """Yield every internal node of the tree (preorder)."""
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if isinstance(node, SplitNode):
            yield node
            stack.append(node.right)
            stack.append(node.left)


def local_feature_weights(tree: DecisionTree, n_features: int) -> np.ndarray:
    """Per-feature mean gain-ratio contribution across the tree's splits.

    Sums each split's gain ratio onto its feature, divided by the total
    number of internal nodes.  A stump-free tree (single leaf) yields all
    zeros.
    """
    weights = np.zeros(n_features, dtype=np.float64)
    if tree.n_internal_nodes == 0:
        return weights
    for node in iter_split_nodes(tree):
        weights[node.feature_index] += node.gain_ratio
    return weights / tree.n_internal_nodes

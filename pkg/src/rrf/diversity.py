"""Correlation-based ensemble pruning on held-out validation predictions.

Each tree's class-probability output on the validation set, flattened to
one vector, feeds a Pearson correlation matrix.  Trees connected by
correlations at or above a threshold form clusters; only the
highest-AUC tree of each cluster survives.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .forest import Forest, tree_normalized_weights
from .metrics import (
    MetricError,
    auc_binary,
    auc_macro_ovr,
)
from .tree import predict_proba_matrix

DEFAULT_CORRELATION_THRESHOLD = 0.93
# Tolerance for "elementwise equal" when both vectors are constant.
_EQUAL_EPS = 1e-12


class DiversityError(Exception):
    """Base class for ensemble-pruning failures."""


class SingleClassValidation(DiversityError):
    """Validation labels contain a single class; per-tree AUC is undefined."""


@dataclass(frozen=True)
class PredictionMatrix:
    """Per-tree flattened probability outputs on the validation set."""

    vectors: np.ndarray  # (n_trees, n_valid * n_classes), row-major per tree
    tree_ids: tuple[int, ...]
    n_valid: int
    n_classes: int


@dataclass(frozen=True)
class PruningResult:
    correlation: np.ndarray        # (n_trees, n_trees) symmetric, unit diagonal
    clusters: tuple[tuple[int, ...], ...]
    per_tree_auc: np.ndarray
    retained: tuple[int, ...]
    threshold: float


def prediction_matrix(forest: Forest, valid) -> PredictionMatrix:
    """Flatten every tree's validation probability matrix into one vector."""
    if valid.n_samples < 1:
        raise DiversityError("validation set is empty")
    vectors = np.stack([predict_proba_matrix(tree, valid.rows).ravel() for tree in forest.trees])
    return PredictionMatrix(
        vectors=vectors,
        tree_ids=tuple(range(forest.n_trees)),
        n_valid=valid.n_samples,
        n_classes=forest.n_classes,
    )


def pearson_matrix(preds: PredictionMatrix) -> np.ndarray:
    """Pairwise Pearson correlations with explicit zero-variance handling.

    Two constant vectors correlate at 1 if elementwise equal (within
    1e-12) and 0 otherwise; a constant against a varying vector gives 0.
    The diagonal is forced to 1 and the matrix is exactly symmetric.
    """
    vectors = np.asarray(preds.vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] < 2:
        raise DiversityError("need vectors of length >= 2")
    centered = vectors - vectors.mean(axis=1, keepdims=True)
    sumsq = (centered**2).sum(axis=1)
    constant = sumsq == 0.0
    denom = np.sqrt(np.outer(sumsq, sumsq))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (centered @ centered.T) / denom
    corr = np.where(np.isfinite(corr), corr, 0.0)
    if constant.any():
        const_ix = np.nonzero(constant)[0]
        level = vectors[const_ix, 0]
        equal = np.abs(level[:, None] - level[None, :]) <= _EQUAL_EPS
        corr[np.ix_(const_ix, const_ix)] = np.where(equal, 1.0, 0.0)
    corr = (corr + corr.T) / 2.0
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def cluster_by_threshold(corr: np.ndarray, threshold: float) -> tuple[tuple[int, ...], ...]:
    """Connected components of the graph with edges where corr >= threshold.

    Clusters are ordered by their smallest member; members ascend.
    """
    if not 0.0 < threshold <= 1.0:
        raise DiversityError("threshold must lie in (0, 1]")
    corr = np.asarray(corr)
    n = corr.shape[0]
    adjacency = corr >= threshold
    np.fill_diagonal(adjacency, False)
    seen = np.zeros(n, dtype=bool)
    clusters = []
    for start in range(n):
        if seen[start]:
            continue
        members = []
        frontier = [start]
        seen[start] = True
        while frontier:
            node = frontier.pop()
            members.append(node)
            neighbors = np.nonzero(adjacency[node] & ~seen)[0]
            seen[neighbors] = True
            frontier.extend(int(j) for j in neighbors)
        clusters.append(tuple(sorted(members)))
    return tuple(clusters)


def per_tree_auc(preds: PredictionMatrix, valid_labels) -> np.ndarray:
    """AUC of each tree's validation predictions (macro OVR when multiclass)."""
    labels = np.asarray(valid_labels, dtype=np.int64)
    if labels.shape != (preds.n_valid,):
        raise DiversityError("labels must match the validation set")
    aucs = np.empty(len(preds.vectors), dtype=np.float64)
    for t, vector in enumerate(preds.vectors):
        proba = vector.reshape(preds.n_valid, preds.n_classes)
        try:
            if preds.n_classes == 2:
                aucs[t] = auc_binary(proba[:, 1], (labels == 1).astype(np.int64))
            else:
                aucs[t] = auc_macro_ovr(proba, labels)
        except MetricError as exc:
            raise SingleClassValidation(str(exc)) from exc
    return aucs


def prune_correlated(forest: Forest, valid, threshold: float = DEFAULT_CORRELATION_THRESHOLD) -> tuple[Forest, PruningResult]:
    """Keep one maximum-AUC tree per correlation cluster.

    Ties break to the lower tree index.  The surviving trees keep their
    out-of-bag errors; tree weights are renormalized so the best retained
    tree weighs exactly 1.
    """
    if forest.n_trees < 1:
        raise DiversityError("cannot prune an empty forest")
    preds = prediction_matrix(forest, valid)
    corr = pearson_matrix(preds)
    clusters = cluster_by_threshold(corr, threshold)
    aucs = per_tree_auc(preds, valid.labels)
    retained = tuple(sorted(min(cluster, key=lambda t: (-aucs[t], t)) for cluster in clusters))
    keep = list(retained)
    pruned_forest = replace(
        forest,
        trees=[forest.trees[t] for t in keep],
        bootstrap_masks=forest.bootstrap_masks[keep],
        oob_errors=forest.oob_errors[keep],
        tree_weights=tree_normalized_weights(forest.oob_errors[keep]),
    )
    result = PruningResult(
        correlation=corr,
        clusters=clusters,
        per_tree_auc=aucs,
        retained=retained,
        threshold=float(threshold),
    )
    return pruned_forest, result

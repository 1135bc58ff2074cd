"""Bagged forest training, out-of-bag tree weighting, and feature weights.

Each tree trains on a bootstrap resample of the training set; its
out-of-bag error sets an inverse-error weight, normalized so the best
tree weighs exactly 1.  Global feature weights blend every tree's local
gain-ratio weights by tree weight, again normalized to a max of 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .seeds import derive_seed
from .tree import DecisionTree, local_feature_weights, predict_proba_matrix, train_tree

logger = logging.getLogger(__name__)

# Floor applied to out-of-bag error so inverse-error weights stay finite.
OOB_ERROR_FLOOR = 1e-6


class ForestError(Exception):
    """Base class for forest construction and evaluation failures."""


class EmptyForest(ForestError):
    pass


@dataclass
class Forest:
    """Trained ensemble plus the bookkeeping downstream stages need."""

    trees: list[DecisionTree]
    bootstrap_masks: np.ndarray  # (n_trees, n_train) bool; True where a row was NEVER drawn (the OOB set)
    oob_errors: np.ndarray       # (n_trees,) floored OOB misclassification rates
    tree_weights: np.ndarray     # (n_trees,) inverse-error weights, max exactly 1
    feature_set: tuple[int, ...]
    n_features: int
    n_classes: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def bootstrap_indices(master_seed: int, tree_index: int, n_samples: int) -> np.ndarray:
    """The bootstrap draw (with replacement) used for one tree.

    Exposed so the exact resample backing any tree can be reproduced from
    the forest seed alone.
    """
    rng = np.random.default_rng(derive_seed(master_seed, tree_index))
    return rng.integers(0, n_samples, size=n_samples)


def oob_error(tree: DecisionTree, train, oob_mask: np.ndarray) -> float:
    """Misclassification rate on the rows the tree never saw.

    Floored at ``OOB_ERROR_FLOOR``; an empty out-of-bag set (possible for
    tiny samples) degrades to the floor with a logged warning.
    """
    oob_mask = np.asarray(oob_mask, dtype=bool)
    if not oob_mask.any():
        logger.warning("tree has an empty out-of-bag set; using error floor %.1e", OOB_ERROR_FLOOR)
        return OOB_ERROR_FLOOR
    proba = predict_proba_matrix(tree, train.rows[oob_mask])
    predicted = proba.argmax(axis=1)
    err = float(np.mean(predicted != train.labels[oob_mask]))
    return max(err, OOB_ERROR_FLOOR)


def tree_normalized_weights(oob_errors: np.ndarray) -> np.ndarray:
    """Inverse-error weights scaled so the maximum is exactly 1."""
    oob_errors = np.asarray(oob_errors, dtype=np.float64)
    if oob_errors.size == 0:
        raise EmptyForest("no trees to weight")
    if np.any(oob_errors <= 0.0):
        raise ForestError("out-of-bag errors must be positive (floored)")
    weights = oob_errors.min() / oob_errors
    weights[np.argmin(oob_errors)] = 1.0
    return weights


def train_forest(train, feature_set, n_trees: int, subset_size: int, min_leaf: int, master_seed: int) -> Forest:
    """Train ``n_trees`` bagged trees restricted to ``feature_set``.

    Tree ``t`` derives its own seed from ``master_seed`` and ``t``; the
    same seed stream drives both the bootstrap draw and the per-node
    feature subsets, so retraining is fully reproducible.
    """
    if n_trees < 1:
        raise ForestError(f"a forest needs at least one tree, got {n_trees}")
    feature_set = tuple(sorted(int(j) for j in feature_set))
    n = train.n_samples
    trees: list[DecisionTree] = []
    oob_masks = np.ones((n_trees, n), dtype=bool)
    errors = np.empty(n_trees, dtype=np.float64)
    for t in range(n_trees):
        rng = np.random.default_rng(derive_seed(master_seed, t))
        draw = rng.integers(0, n, size=n)
        tree = train_tree(train.take(draw), feature_set, subset_size, min_leaf, rng)
        oob_masks[t, draw] = False
        errors[t] = oob_error(tree, train, oob_masks[t])
        trees.append(tree)
    return Forest(
        trees=trees,
        bootstrap_masks=oob_masks,
        oob_errors=errors,
        tree_weights=tree_normalized_weights(errors),
        feature_set=feature_set,
        n_features=train.n_features,
        n_classes=train.n_classes,
    )


def forest_predict_proba(forest: Forest, row) -> np.ndarray:
    """Soft vote: unweighted mean of per-tree leaf distributions for one row."""
    return forest_predict_proba_matrix(forest, np.asarray(row, dtype=np.float64)[None, :])[0]


def forest_predict_proba_matrix(forest: Forest, rows: np.ndarray) -> np.ndarray:
    """Soft-vote probabilities for a whole matrix of rows."""
    if forest.n_trees == 0:
        raise EmptyForest("cannot predict with an empty forest")
    out = np.zeros((np.asarray(rows).shape[0], forest.n_classes), dtype=np.float64)
    for tree in forest.trees:
        out += predict_proba_matrix(tree, rows)
    return out / forest.n_trees


def forest_predict(forest: Forest, rows: np.ndarray) -> np.ndarray:
    """Predicted labels (argmax of the soft vote; ties to the lowest class)."""
    return forest_predict_proba_matrix(forest, rows).argmax(axis=1)


def global_feature_weights(forest: Forest, n_features: int) -> np.ndarray:
    """Tree-weight-blended feature weights, scaled so the maximum is 1.

    Sums each tree's local gain-ratio weights times its tree weight.  If
    every tree is a bare leaf the result is all zeros (logged), which
    callers must treat as "no usable signal".
    """
    scores = np.zeros(n_features, dtype=np.float64)
    for tree, gamma in zip(forest.trees, forest.tree_weights):
        scores += gamma * local_feature_weights(tree, n_features)
    top = scores.max(initial=0.0)
    if top <= 0.0:
        logger.warning("DegenerateWeights: no tree made any split; all feature weights are zero")
        return np.zeros(n_features, dtype=np.float64)
    return scores / top

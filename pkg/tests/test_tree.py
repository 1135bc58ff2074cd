"""Entropy math, tree induction, prediction, and per-tree feature weights."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rrf.data import Dataset
from rrf.tree import (
    AllZeroCounts,
    DecisionTree,
    DimensionMismatch,
    EmptySample,
    FNotPositive,
    InconsistentCounts,
    LeafNode,
    PureParent,
    SplitNode,
    entropy,
    info_gain,
    info_gain_ratio,
    iter_split_nodes,
    local_feature_weights,
    predict_proba,
    predict_proba_matrix,
    train_tree,
)

# Frozen oracle values, computed by direct evaluation of the formulas.
ENTROPY_1_3 = 0.8112781244591328        # -0.25*log2(0.25) - 0.75*log2(0.75)
GAIN_5_5_INTO_3_2 = 0.02904940554533142  # 1 - H(0.6), H(0.6) = 0.9709505944546686


def _ds(rows, labels, n_classes=2):
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(
        rows,
        labels,
        tuple(f"f{i}" for i in range(rows.shape[1])),
        tuple(f"c{i}" for i in range(n_classes)),
    )


def _structure(node):
    """Comparable nested tuple of a tree's shape and parameters."""
    if isinstance(node, LeafNode):
        return ("leaf", tuple(node.class_distribution.tolist()))
    return (
        "split",
        node.feature_index,
        node.threshold,
        node.gain_ratio,
        _structure(node.left),
        _structure(node.right),
    )


# ------------------------------------------------------------------ entropy

@pytest.mark.example
def test_entropy_pure_node():
    assert entropy([10, 0]) == 0.0


@pytest.mark.example
def test_entropy_uniform_binary():
    assert entropy([5, 5]) == 1.0


@pytest.mark.example
def test_entropy_one_three():
    assert entropy([1, 3]) == pytest.approx(ENTROPY_1_3, abs=1e-12)
    assert round(entropy([1, 3]), 6) == 0.811278


def test_entropy_all_zero_counts():
    with pytest.raises(AllZeroCounts):
        entropy([0, 0, 0])


@given(st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=6).filter(sum))
def test_entropy_permutation_invariant_and_bounded(counts):
    base = entropy(counts)
    assert entropy(list(reversed(counts))) == pytest.approx(base, abs=1e-12)
    k = len(counts)
    assert -1e-12 <= base <= np.log2(k) + 1e-12
    uniform = entropy([1] * k)
    assert base <= uniform + 1e-12


# ---------------------------------------------------------------- info gain

@pytest.mark.example
def test_info_gain_perfect_split():
    assert info_gain([5, 5], [5, 0], [0, 5]) == 1.0


@pytest.mark.example
def test_info_gain_weak_split():
    assert info_gain([5, 5], [3, 2], [2, 3]) == pytest.approx(GAIN_5_5_INTO_3_2, abs=1e-12)
    assert round(info_gain([5, 5], [3, 2], [2, 3]), 6) == 0.029049


@pytest.mark.example
def test_info_gain_pure_parent_is_zero():
    assert info_gain([4, 0], [2, 0], [2, 0]) == 0.0
    assert info_gain([4, 0], [1, 0], [3, 0]) == 0.0


def test_info_gain_inconsistent_counts():
    with pytest.raises(InconsistentCounts):
        info_gain([5, 5], [3, 2], [1, 3])


@pytest.mark.example
def test_info_gain_ratio_examples():
    assert info_gain_ratio([5, 5], [5, 0], [0, 5]) == 1.0
    assert info_gain_ratio([5, 5], [3, 2], [2, 3]) == pytest.approx(GAIN_5_5_INTO_3_2, abs=1e-12)


@pytest.mark.example
def test_info_gain_ratio_pure_parent_error():
    with pytest.raises(PureParent):
        info_gain_ratio([8, 0], [4, 0], [4, 0])


# ----------------------------------------------------------------- training

@pytest.mark.example
def test_train_tree_single_class_sample_is_a_leaf():
    sample = _ds([[0.0], [1.0], [2.0]], [0, 0, 0])
    tree = train_tree(sample, (0,), 1, 1, np.random.default_rng(0))
    assert tree.n_internal_nodes == 0
    assert isinstance(tree.root, LeafNode)
    np.testing.assert_allclose(tree.root.class_distribution, [1.0, 0.0])


@pytest.mark.example
def test_train_tree_two_point_split():
    sample = _ds([[0.0], [1.0]], [0, 1])
    tree = train_tree(sample, (0,), 1, 1, np.random.default_rng(0))
    assert tree.n_internal_nodes == 1
    root = tree.root
    assert isinstance(root, SplitNode)
    assert root.feature_index == 0
    assert root.threshold == 0.5
    assert root.gain_ratio == 1.0
    assert isinstance(root.left, LeafNode) and isinstance(root.right, LeafNode)
    np.testing.assert_allclose(root.left.class_distribution, [1.0, 0.0])
    np.testing.assert_allclose(root.right.class_distribution, [0.0, 1.0])


@pytest.mark.example
def test_train_tree_deterministic_given_seed():
    rng = np.random.default_rng(9)
    rows = rng.normal(size=(60, 5))
    labels = (rows[:, 1] - rows[:, 3] > 0).astype(np.int64)
    sample = _ds(rows, labels)
    one = train_tree(sample, tuple(range(5)), 2, 1, np.random.default_rng(5))
    two = train_tree(sample, tuple(range(5)), 2, 1, np.random.default_rng(5))
    assert _structure(one.root) == _structure(two.root)
    assert one.n_internal_nodes == two.n_internal_nodes


def test_train_tree_empty_sample():
    sample = _ds(np.empty((0, 1)), np.empty(0, dtype=np.int64))
    with pytest.raises(EmptySample):
        train_tree(sample, (0,), 1, 1, np.random.default_rng(0))


def test_train_tree_subset_size_must_be_positive():
    sample = _ds([[0.0], [1.0]], [0, 1])
    with pytest.raises(FNotPositive):
        train_tree(sample, (0,), 0, 1, np.random.default_rng(0))


def test_train_tree_min_leaf_blocks_small_nodes():
    sample = _ds([[0.0], [1.0], [2.0]], [0, 1, 0])
    tree = train_tree(sample, (0,), 1, 2, np.random.default_rng(0))
    assert tree.n_internal_nodes == 0  # 3 samples < 2 * min_leaf


def test_train_tree_stops_without_positive_gain():
    sample = _ds([[1.0], [1.0], [1.0], [1.0]], [0, 1, 0, 1])
    tree = train_tree(sample, (0,), 1, 1, np.random.default_rng(0))
    assert tree.n_internal_nodes == 0
    np.testing.assert_allclose(tree.root.class_distribution, [0.5, 0.5])


def test_train_tree_recorded_ratio_matches_recomputation():
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(150, 6))
    labels = ((rows[:, 0] + 0.7 * rows[:, 2] + 0.1 * rng.normal(size=150)) > 0).astype(np.int64)
    tree = train_tree(_ds(rows, labels), tuple(range(6)), 2, 1, np.random.default_rng(11))
    assert tree.n_internal_nodes >= 1
    seen = 0
    for node in iter_split_nodes(tree):
        parent = node.left_class_counts + node.right_class_counts
        recomputed = info_gain_ratio(parent, node.left_class_counts, node.right_class_counts)
        assert abs(recomputed - node.gain_ratio) <= 1e-12
        assert node.n_left >= 1 and node.n_right >= 1
        assert node.n_left + node.n_right == node.n_parent
        seen += 1
    assert seen == tree.n_internal_nodes


# --------------------------------------------------------------- prediction

@pytest.mark.example
def test_predict_proba_single_leaf():
    tree = DecisionTree(
        root=LeafNode(np.array([1.0, 0.0])),
        n_features=3, n_classes=2, n_internal_nodes=0,
        feature_subset_size=1, feature_set_snapshot=(0, 1, 2),
    )
    np.testing.assert_allclose(predict_proba(tree, [5.0, -1.0, 2.0]), [1.0, 0.0])


@pytest.mark.example
def test_predict_proba_routes_through_split():
    sample = _ds([[0.0], [1.0]], [0, 1])
    tree = train_tree(sample, (0,), 1, 1, np.random.default_rng(0))
    np.testing.assert_allclose(predict_proba(tree, [0.0]), [1.0, 0.0])
    np.testing.assert_allclose(predict_proba(tree, [1.0]), [0.0, 1.0])
    # Boundary rows follow the <= threshold convention.
    np.testing.assert_allclose(predict_proba(tree, [0.5]), [1.0, 0.0])


@pytest.mark.example
def test_predict_proba_dimension_mismatch():
    sample = _ds([[0.0, 1.0], [1.0, 0.0]], [0, 1])
    tree = train_tree(sample, (0, 1), 1, 1, np.random.default_rng(0))
    with pytest.raises(DimensionMismatch):
        predict_proba(tree, [0.0])
    with pytest.raises(DimensionMismatch):
        predict_proba_matrix(tree, np.zeros((3, 5)))


def test_prediction_distributions_sum_to_one():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(120, 4))
    labels = rng.integers(0, 3, size=120)
    tree = train_tree(_ds(rows, labels, n_classes=3), tuple(range(4)), 2, 1, np.random.default_rng(2))
    probs = predict_proba_matrix(tree, rng.normal(size=(40, 4)))
    np.testing.assert_allclose(probs.sum(axis=1), np.ones(40), atol=1e-9)
    assert (probs >= 0).all()


# ------------------------------------------------------------ local weights

@pytest.mark.example
def test_local_weights_leaf_only_tree():
    tree = DecisionTree(
        root=LeafNode(np.array([0.5, 0.5])),
        n_features=4, n_classes=2, n_internal_nodes=0,
        feature_subset_size=1, feature_set_snapshot=(0, 1, 2, 3),
    )
    np.testing.assert_array_equal(local_feature_weights(tree, 4), np.zeros(4))


def _split(feature, ratio, left=None, right=None):
    return SplitNode(
        feature_index=feature,
        threshold=0.5,
        gain_ratio=ratio,
        left_class_counts=np.array([1, 0]),
        right_class_counts=np.array([0, 1]),
        left=LeafNode(np.array([1.0, 0.0])) if left is None else left,
        right=LeafNode(np.array([0.0, 1.0])) if right is None else right,
    )


@pytest.mark.example
def test_local_weights_average_over_all_internal_nodes():
    # Two internal nodes, both splitting feature 3, ratios 1.0 and 0.5.
    root = _split(3, 1.0, left=_split(3, 0.5))
    tree = DecisionTree(
        root=root, n_features=5, n_classes=2, n_internal_nodes=2,
        feature_subset_size=1, feature_set_snapshot=(3,),
    )
    weights = local_feature_weights(tree, 5)
    assert weights[3] == pytest.approx(0.75, abs=1e-12)
    assert np.count_nonzero(weights) == 1


@pytest.mark.example
def test_local_weights_divide_by_total_node_count():
    # Four internal nodes; feature 0 appears once with ratio 0.8.
    chain = _split(3, 0.1)
    chain = _split(2, 0.4, left=chain)
    chain = _split(1, 0.3, left=chain)
    root = _split(0, 0.8, left=chain)
    tree = DecisionTree(
        root=root, n_features=4, n_classes=2, n_internal_nodes=4,
        feature_subset_size=1, feature_set_snapshot=(0, 1, 2, 3),
    )
    weights = local_feature_weights(tree, 4)
    assert weights[0] == pytest.approx(0.2, abs=1e-12)


def test_local_weights_scale_back_to_ratio_total():
    rng = np.random.default_rng(8)
    rows = rng.normal(size=(100, 5))
    labels = (rows[:, 0] > 0).astype(np.int64)
    tree = train_tree(_ds(rows, labels), tuple(range(5)), 2, 1, np.random.default_rng(4))
    weights = local_feature_weights(tree, 5)
    total_ratio = sum(node.gain_ratio for node in iter_split_nodes(tree))
    assert weights.sum() * tree.n_internal_nodes == pytest.approx(total_ratio, rel=1e-12)
    assert ((0.0 <= weights) & (weights <= 1.0)).all()


def test_node_subsets_come_from_the_snapshot():
    rng = np.random.default_rng(12)
    rows = rng.normal(size=(80, 6))
    labels = (rows[:, 4] > 0).astype(np.int64)
    allowed = (1, 4, 5)
    tree = train_tree(_ds(rows, labels), allowed, 2, 1, np.random.default_rng(3))
    assert tree.feature_set_snapshot == allowed
    for node in iter_split_nodes(tree):
        assert node.feature_index in allowed

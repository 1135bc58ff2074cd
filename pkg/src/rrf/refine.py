"""Iterative feature-pool refinement with an analytic tree-growth bound.

The loop keeps two pools over the active features: an important pool that
only ever grows, and an unimportant pool that shrinks as features are
pruned (weight far below the pool mean) or promoted (weight reaching the
important pool's minimum).  After every pool update an analytic model of
forest accuracy — split-quality strength minus an inter-tree correlation
penalty — bounds how many trees may be added while keeping the modeled
accuracy change positive, and the forest is retrained from scratch on the
surviving features.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .forest import Forest, forest_predict_proba_matrix, global_feature_weights, train_forest
from .metrics import accuracy
from .seeds import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_INITIAL_TREES = 20
DEFAULT_MAX_ITERATIONS = 8
DEFAULT_TREES_ADDED_CAP = 50
# |margin slope| below this counts as zero: growth direction is undefined,
# so no trees are added and the iteration is flagged degenerate.
NU_EPSILON = 1e-12


class RefineError(Exception):
    """Base class for refinement failures."""


class EmptyPool(RefineError):
    pass


class EmptyImportantPool(RefineError):
    pass


class OverlapViolation(RefineError):
    pass


class EmptyFeatureSet(RefineError):
    pass


@dataclass(frozen=True)
class FeaturePools:
    """Partition of the active features into important/unimportant pools."""

    active: frozenset
    important: frozenset
    unimportant: frozenset
    removed: frozenset

    def __post_init__(self):
        object.__setattr__(self, "active", frozenset(self.active))
        object.__setattr__(self, "important", frozenset(self.important))
        object.__setattr__(self, "unimportant", frozenset(self.unimportant))
        object.__setattr__(self, "removed", frozenset(self.removed))
        if self.important | self.unimportant != self.active:
            raise RefineError("important and unimportant pools must cover the active set")
        if self.important & self.unimportant:
            raise RefineError("important and unimportant pools must be disjoint")
        if self.active & self.removed:
            raise RefineError("removed features cannot stay active")


@dataclass(frozen=True)
class GrowthParams:
    """Inputs to the tree-growth bound for one refinement step."""

    n_important: int
    n_unimportant: int
    subset_size: int
    avg_nodes: float   # mean internal-node count of the current forest
    n_trees: int
    delta_important: int
    delta_unimportant: int

    def __post_init__(self):
        if self.n_important < 0 or self.n_unimportant < 0:
            raise RefineError("pool sizes must be non-negative")
        if self.subset_size < 1:
            raise RefineError("feature subset size must be >= 1")
        if self.n_trees < 1:
            raise RefineError("tree count must be >= 1")
        if self.avg_nodes < 0:
            raise RefineError("average node count must be >= 0")


@dataclass(frozen=True)
class GrowthQuantities:
    """Every intermediate of the growth bound, for tracing and the CLI."""

    good_split_prob: float
    partial_important: float
    partial_unimportant: float
    strength: float
    overlap_prob: float
    correlation: float
    correlation_term: float
    strength_slope: float  # d(strength)/d(good_split_prob)
    margin_slope: float    # d(strength - correlation_term)/d(n_trees)
    bound: float
    trees_to_add: int
    degenerate: bool


@dataclass(frozen=True)
class IterationTrace:
    """State after one refinement iteration (reproducibility log)."""

    iteration: int
    n_active: int
    n_important: int
    n_unimportant: int
    pruned: tuple
    promoted: tuple
    trees_added: int
    growth_bound: float
    degenerate: bool
    n_trees: int
    avg_nodes: float
    valid_accuracy: float
    pools: "FeaturePools"


@dataclass(frozen=True)
class RefineConfig:
    initial_trees: int = DEFAULT_INITIAL_TREES
    subset_size: int | None = None  # default: floor(sqrt(n_features))
    min_leaf: int = 1
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    trees_added_cap: int = DEFAULT_TREES_ADDED_CAP
    seed: int = 0

    def __post_init__(self):
        if self.initial_trees < 1:
            raise RefineError("initial_trees must be >= 1")
        if self.subset_size is not None and self.subset_size < 1:
            raise RefineError("subset_size must be >= 1")
        if self.max_iterations < 0:
            raise RefineError("max_iterations must be >= 0")
        if self.trees_added_cap < 0:
            raise RefineError("trees_added_cap must be >= 0")


def _log_choose(n: int, k: int) -> float:
    """log C(n, k); requires 0 <= k <= n."""
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def good_split_prob(n_important: int, n_unimportant: int, subset_size: int) -> float:
    """Probability a uniform feature subset contains an important feature.

    Equals 1 - C(v, f)/C(u+v, f) for pool sizes u, v and subset size f;
    pinned to 1 when the subset cannot avoid important features (v < f)
    or cannot be drawn at all (u + v < f).
    """
    u, v, f = int(n_important), int(n_unimportant), int(subset_size)
    if f < 1:
        raise RefineError("subset size must be >= 1")
    if v < f or u + v < f:
        return 1.0
    ratio = math.exp(_log_choose(v, f) - _log_choose(u + v, f))
    return min(1.0, max(0.0, 1.0 - ratio))


def good_split_prob_partials(n_important: int, n_unimportant: int, subset_size: int) -> tuple[float, float]:
    """Discrete sensitivities of the good-split probability to the pool sizes.

    Zero when the probability is pinned at 1 (no unimportant-only subset
    exists).  Evaluated through log-gamma so large pools cannot overflow.
    """
    u, v, f = int(n_important), int(n_unimportant), int(subset_size)
    if v < f or u + v <= f:
        return (0.0, 0.0)
    log_pu = (
        math.lgamma(v + 1)
        + math.lgamma(u + v - f)
        + math.log(f)
        - math.lgamma(v - f + 1)
        - math.lgamma(u + v + 1)
    )
    partial_important = math.exp(log_pu)
    if u == 0:
        return (partial_important, 0.0)
    log_pv = (
        math.lgamma(v)
        + math.lgamma(u + v - f)
        + math.log(u)
        + math.log(f)
        - math.lgamma(v - f + 1)
        - math.lgamma(u + v)
        - math.log(u + v)
    )
    return (partial_important, -math.exp(log_pv))


def strength(good_split: float, avg_nodes: float, n_trees: int) -> float:
    """Probability at least one tree achieves a good split at every node."""
    if not 0.0 <= good_split <= 1.0:
        raise RefineError("good split probability must lie in [0, 1]")
    return 1.0 - (1.0 - good_split**avg_nodes) ** n_trees


def pairwise_overlap_and_correlation(
    n_important: int, n_unimportant: int, subset_size: int, avg_nodes: float
) -> tuple[float, float]:
    """(p, C): chance two subsets share a feature, and its per-tree power.

    p = 1 - C(m-f, f)/C(m, f) over m = u + v active features (1 when two
    disjoint subsets cannot fit); C = p^avg_nodes models the correlation
    between two trees agreeing on every node.
    """
    m = int(n_important) + int(n_unimportant)
    f = int(subset_size)
    if f < 1 or m < f:
        raise RefineError("need at least subset_size active features")
    if m - f < f:
        overlap = 1.0
    else:
        overlap = 1.0 - math.exp(_log_choose(m - f, f) - _log_choose(m, f))
        overlap = min(1.0, max(0.0, overlap))
    return overlap, overlap**avg_nodes


def correlation_accuracy_term(correlation: float, n_trees: int) -> float:
    """Accuracy penalty attributed to inter-tree correlation."""
    if not 0.0 <= correlation <= 1.0:
        raise RefineError("correlation must lie in [0, 1]")
    return 1.0 - (1.0 - correlation) ** (n_trees / 2.0)


def margin_slope(good_split: float, correlation: float, avg_nodes: float, n_trees: float) -> float:
    """d(strength - correlation_term)/d(tree count) at fixed q and C.

    A term whose base has vanished (q**avg_nodes == 1, or correlation == 1)
    contributes zero.
    """
    survival = 1.0 - good_split**avg_nodes
    term_strength = -(survival**n_trees) * math.log(survival) if survival > 0.0 else 0.0
    decay = 1.0 - correlation
    term_corr = 0.5 * decay ** (n_trees / 2.0) * math.log(decay) if decay > 0.0 else 0.0
    return term_strength + term_corr


def growth_quantities(params: GrowthParams, trees_added_cap: int = DEFAULT_TREES_ADDED_CAP) -> GrowthQuantities:
    """Evaluate the full growth model and the admissible tree increment.

    The increment is the largest non-negative integer strictly below
    |strength_slope * (partial_u * delta_u + partial_v * delta_v) /
    margin_slope|, capped at ``trees_added_cap``.  A margin slope at zero
    (within ``NU_EPSILON``) gives no direction: the increment is 0 and the
    result is flagged degenerate.
    """
    u, v, f = params.n_important, params.n_unimportant, params.subset_size
    t_av, n_trees = params.avg_nodes, params.n_trees
    q = good_split_prob(u, v, f)
    partial_u, partial_v = good_split_prob_partials(u, v, f)
    overlap, correlation = pairwise_overlap_and_correlation(u, v, f, t_av)
    zeta = strength(q, t_av, n_trees)
    eta = correlation_accuracy_term(correlation, n_trees)

    q_pow = q**t_av
    if t_av <= 0.0 or (q == 0.0 and t_av < 1.0):
        strength_slope = 0.0
    else:
        strength_slope = n_trees * t_av * q ** (t_av - 1.0) * (1.0 - q_pow) ** (n_trees - 1)

    slope = margin_slope(q, correlation, t_av, n_trees)

    if abs(slope) < NU_EPSILON:
        logger.info("ZeroNu: margin slope %.3e is below %.0e; adding no trees", slope, NU_EPSILON)
        return GrowthQuantities(
            good_split_prob=q,
            partial_important=partial_u,
            partial_unimportant=partial_v,
            strength=zeta,
            overlap_prob=overlap,
            correlation=correlation,
            correlation_term=eta,
            strength_slope=strength_slope,
            margin_slope=slope,
            bound=math.inf,
            trees_to_add=0,
            degenerate=True,
        )

    numerator = strength_slope * (partial_u * params.delta_important + partial_v * params.delta_unimportant)
    bound = abs(numerator / slope)
    trees_to_add = max(0, min(math.ceil(bound) - 1, int(trees_added_cap)))
    assert trees_to_add == 0 or trees_to_add < bound
    return GrowthQuantities(
        good_split_prob=q,
        partial_important=partial_u,
        partial_unimportant=partial_v,
        strength=zeta,
        overlap_prob=overlap,
        correlation=correlation,
        correlation_term=eta,
        strength_slope=strength_slope,
        margin_slope=slope,
        bound=bound,
        trees_to_add=trees_to_add,
        degenerate=False,
    )


def delta_b(params: GrowthParams, trees_added_cap: int = DEFAULT_TREES_ADDED_CAP) -> int:
    """The admissible tree-count increment for one refinement step."""
    return growth_quantities(params, trees_added_cap).trees_to_add


def initial_pools(weights, feature_ids) -> FeaturePools:
    """Seed the pools: top floor(sqrt(|F0|)) features by weight are important.

    Ties break to the lower feature index.
    """
    feature_ids = [int(j) for j in feature_ids]
    weights = np.asarray(weights, dtype=np.float64)
    k = int(math.isqrt(len(feature_ids)))
    ranked = sorted(feature_ids, key=lambda j: (-weights[j], j))
    important = frozenset(ranked[:k])
    return FeaturePools(
        active=frozenset(feature_ids),
        important=important,
        unimportant=frozenset(feature_ids) - important,
        removed=frozenset(),
    )


def prune_set(unimportant, weights) -> frozenset:
    """Unimportant features weighing far below the pool: w < mean - 2*std.

    Standard deviation is the population form.  When no feature clears
    the cut, every feature attaining the pool minimum is pruned instead,
    so the result is never empty.
    """
    pool = sorted(int(j) for j in unimportant)
    if not pool:
        raise EmptyPool("cannot prune from an empty pool")
    weights = np.asarray(weights, dtype=np.float64)
    values = weights[pool]
    cutoff = values.mean() - 2.0 * values.std()
    chosen = frozenset(j for j, w in zip(pool, values) if w < cutoff)
    if chosen:
        return chosen
    low = values.min()
    return frozenset(j for j, w in zip(pool, values) if w == low)


def promote_set(unimportant, important, weights) -> frozenset:
    """Unimportant features whose weight reaches the important pool's minimum."""
    important = sorted(int(j) for j in important)
    if not important:
        raise EmptyImportantPool("promotion threshold needs a non-empty important pool")
    weights = np.asarray(weights, dtype=np.float64)
    threshold = weights[important].min()
    return frozenset(int(j) for j in unimportant if weights[int(j)] >= threshold)


def update_pools(pools: FeaturePools, pruned, promoted) -> tuple[FeaturePools, int, int]:
    """Apply one prune/promote step; returns new pools and signed size deltas."""
    pruned = frozenset(int(j) for j in pruned)
    promoted = frozenset(int(j) for j in promoted)
    if not pruned <= pools.unimportant or not promoted <= pools.unimportant:
        raise OverlapViolation("pruned and promoted features must come from the unimportant pool")
    if pruned & promoted:
        raise OverlapViolation("a feature cannot be pruned and promoted in the same step")
    active = pools.active - pruned
    if not active:
        raise EmptyFeatureSet("refusing to prune the last active feature")
    important = pools.important | promoted
    unimportant = pools.unimportant - (pruned | promoted)
    updated = FeaturePools(
        active=active,
        important=important,
        unimportant=unimportant,
        removed=pools.removed | pruned,
    )
    return updated, len(important) - len(pools.important), len(unimportant) - len(pools.unimportant)


def refine(train, valid, config: RefineConfig) -> tuple[Forest, list[IterationTrace]]:
    """Run the full refinement loop; returns the final forest and its trace.

    Each iteration: promote from the unimportant pool, prune the rest's
    stragglers, bound the tree increment with the growth model, retrain
    from scratch on the surviving features, and recompute feature weights
    from the new forest.  Stops when the unimportant pool drops below the
    subset size or after ``config.max_iterations`` iterations.
    """
    n_features = train.n_features
    feature_ids = tuple(range(n_features))
    subset_size = config.subset_size if config.subset_size is not None else int(math.isqrt(n_features))
    if subset_size > n_features:
        raise RefineError("subset_size cannot exceed the number of features")

    n_trees = config.initial_trees
    forest = train_forest(
        train, feature_ids, n_trees, subset_size, config.min_leaf, derive_seed(config.seed, 0)
    )
    weights = global_feature_weights(forest, n_features)
    pools = initial_pools(weights, feature_ids)

    traces: list[IterationTrace] = []
    iteration = 0
    while len(pools.unimportant) >= subset_size and iteration < config.max_iterations:
        iteration += 1
        avg_nodes = float(np.mean([t.n_internal_nodes for t in forest.trees]))
        promoted = promote_set(pools.unimportant, pools.important, weights)
        remainder = pools.unimportant - promoted
        pruned = prune_set(remainder, weights) if remainder else frozenset()
        params = GrowthParams(
            n_important=len(pools.important),
            n_unimportant=len(pools.unimportant),
            subset_size=subset_size,
            avg_nodes=avg_nodes,
            n_trees=n_trees,
            delta_important=len(promoted),
            delta_unimportant=-(len(pruned) + len(promoted)),
        )
        pools, delta_u, delta_v = update_pools(pools, pruned, promoted)
        assert delta_u == params.delta_important and delta_v == params.delta_unimportant
        growth = growth_quantities(params, config.trees_added_cap)
        n_trees += growth.trees_to_add
        forest = train_forest(
            train,
            tuple(sorted(pools.active)),
            n_trees,
            subset_size,
            config.min_leaf,
            derive_seed(config.seed, iteration),
        )
        weights = global_feature_weights(forest, n_features)
        valid_acc = accuracy(forest_predict_proba_matrix(forest, valid.rows).argmax(axis=1), valid.labels)
        traces.append(
            IterationTrace(
                iteration=iteration,
                n_active=len(pools.active),
                n_important=len(pools.important),
                n_unimportant=len(pools.unimportant),
                pruned=tuple(sorted(pruned)),
                promoted=tuple(sorted(promoted)),
                trees_added=growth.trees_to_add,
                growth_bound=growth.bound,
                degenerate=growth.degenerate,
                n_trees=n_trees,
                avg_nodes=avg_nodes,
                valid_accuracy=valid_acc,
                pools=pools,
            )
        )
    return forest, traces


TRACE_CSV_COLUMNS = (
    "n",
    "n_features",
    "n_important",
    "n_unimportant",
    "n_pruned",
    "n_promoted",
    "delta_b",
    "valid_accuracy",
)


def trace_csv_rows(traces: list[IterationTrace]) -> list[tuple]:
    """Serialize traces to rows matching ``TRACE_CSV_COLUMNS``."""
    return [
        (
            tr.iteration,
            tr.n_active,
            tr.n_important,
            tr.n_unimportant,
            len(tr.pruned),
            len(tr.promoted),
            tr.trees_added,
            f"{tr.valid_accuracy:.6f}",
        )
        for tr in traces
    ]

"""Refined random forest: feature-pool refinement, bounded tree growth, and
correlation-based ensemble pruning, with a benchmark harness."""

from .data import Dataset, SplitSpec, load_csv, stratified_split
from .diversity import PruningResult, prune_correlated
from .forest import Forest, forest_predict_proba, global_feature_weights, train_forest
from .metrics import EvalReport, accuracy, auc_binary, auc_macro_ovr, evaluate
from .refine import FeaturePools, GrowthParams, IterationTrace, RefineConfig, delta_b, refine
from .tree import DecisionTree, predict_proba, train_tree

__all__ = [
    "Dataset",
    "SplitSpec",
    "load_csv",
    "stratified_split",
    "DecisionTree",
    "train_tree",
    "predict_proba",
    "Forest",
    "train_forest",
    "forest_predict_proba",
    "global_feature_weights",
    "FeaturePools",
    "GrowthParams",
    "IterationTrace",
    "RefineConfig",
    "delta_b",
    "refine",
    "PruningResult",
    "prune_correlated",
    "EvalReport",
    "accuracy",
    "auc_binary",
    "auc_macro_ovr",
    "evaluate",
]

__version__ = "0.1.0"

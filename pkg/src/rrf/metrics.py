"""Evaluation metrics: accuracy, rank-based binary AUC, macro one-vs-rest AUC."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(Exception):
    """Base class for metric computation failures."""


class LengthMismatch(MetricError):
    pass


class SingleClassPresent(MetricError):
    pass


class NoValidClass(MetricError):
    pass


def accuracy(predicted, actual) -> float:
    """Fraction of positions where predicted and actual labels agree."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape or predicted.ndim != 1 or predicted.size == 0:
        raise LengthMismatch("predicted and actual must be equal-length non-empty vectors")
    return float(np.mean(predicted == actual))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.float64)
    return starts[inverse] + (counts[inverse] + 1) / 2.0


def auc_binary(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic.

    ``labels`` are 0/1; ``scores`` rank the positive class.  Tied scores
    contribute half a concordant pair, so the result equals exhaustive
    pair counting exactly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise LengthMismatch("scores and labels must be equal-length non-empty vectors")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos + n_neg != labels.size:
        raise MetricError("labels must be 0/1")
    if n_pos == 0 or n_neg == 0:
        raise SingleClassPresent("binary AUC needs at least one positive and one negative")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_macro_ovr(prob_matrix, labels) -> float:
    """Mean one-vs-rest AUC over the classes present in ``labels``.

    Column k of ``prob_matrix`` scores class k.  Classes absent from
    ``labels`` are skipped; so is a class with no negatives (all labels
    equal).  With no scorable class at all the metric is undefined.
    """
    prob_matrix = np.asarray(prob_matrix, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if prob_matrix.ndim != 2 or labels.ndim != 1 or prob_matrix.shape[0] != labels.size:
        raise LengthMismatch("prob_matrix must be (n, n_classes) with one label per row")
    if labels.size and (labels.min() < 0 or labels.max() >= prob_matrix.shape[1]):
        raise MetricError("labels must index prob_matrix columns")
    per_class = []
    for k in np.unique(labels):
        indicator = (labels == k).astype(np.int64)
        if indicator.all():
            continue
        per_class.append(auc_binary(prob_matrix[:, k], indicator))
    if not per_class:
        raise NoValidClass("no class has both positives and negatives")
    return float(np.mean(per_class))


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    auc: float
    n_samples: int
    per_class_auc: tuple[float, ...] | None = None


def evaluate(prob_matrix, labels) -> EvalReport:
    """Accuracy plus AUC (binary rank AUC for 2 columns, macro OVR otherwise)."""
    prob_matrix = np.asarray(prob_matrix, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    predicted = prob_matrix.argmax(axis=1)
    acc = accuracy(predicted, labels)
    per_class: tuple[float, ...] | None = None
    if prob_matrix.shape[1] == 2:
        auc = auc_binary(prob_matrix[:, 1], (labels == 1).astype(np.int64))
    else:
        auc = auc_macro_ovr(prob_matrix, labels)
        per_class = tuple(
            auc_binary(prob_matrix[:, k], (labels == k).astype(np.int64))
            for k in np.unique(labels)
            if not (labels == k).all()
        )
    return EvalReport(accuracy=acc, auc=auc, n_samples=int(labels.size), per_class_auc=per_class)

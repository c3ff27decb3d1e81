"""Metric primitives for the benchmark harness."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import DataError

__all__ = ["mse", "auc"]


def mse(predictions, actuals) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if predictions.shape != actuals.shape or predictions.size == 0:
        raise DataError(
            f"mse needs matching nonempty arrays, got {predictions.shape} and {actuals.shape}"
        )
    return float(np.mean((predictions - actuals) ** 2))


def auc(scores, labels) -> float:
    """Rank-statistic AUC; tied scores contribute through midranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.size == 0:
        raise DataError(
            f"auc needs matching nonempty arrays, got {scores.shape} and {labels.shape}"
        )
    positives = labels == 1
    n1 = int(positives.sum())
    n0 = scores.size - n1
    if n1 == 0 or n0 == 0:
        raise DataError("auc undefined: labels contain a single class")
    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n1 * (n1 + 1) / 2.0) / (n1 * n0)

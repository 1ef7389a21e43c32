"""Binary classification metrics at a fixed 0.5 threshold, and rank-statistic AUC."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

THRESHOLD = 0.5


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    f1: float
    auc: float
    precision: float
    recall: float
    threshold: float = THRESHOLD
    n: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank sum with midranks.

    ``labels`` are 1 for the positive class. Returns NaN when only one class
    is present.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(s, method="average")
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def evaluate_scores(scores, labels, threshold: float = THRESHOLD) -> MetricsReport:
    """Metrics for confidences ``scores`` against 0/1 ``labels`` (1 = DP)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return MetricsReport(
        accuracy=_safe_div(tp + tn, y.size),
        f1=f1,
        auc=roc_auc(s, y),
        precision=precision,
        recall=recall,
        threshold=threshold,
        n=int(y.size),
    )

"""Binary cross-entropy and rank-based ROC-AUC."""
from __future__ import annotations

import numpy as np

from ..errors import UndefinedMetricError
from ..model import tensor as T

PROB_CLAMP = 1e-7


def bce_loss(pred, target):
    """Mean binary cross-entropy; ``pred`` is a probability Tensor (scalar or batch)."""
    pred = T.as_tensor(pred)
    y = np.asarray(target, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError(f"targets must be 0 or 1, got {np.unique(y)}")
    p = T.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    per_example = -(T.log(p) * y + T.log(1.0 - p) * (1.0 - y))
    return T.tmean(per_example)


def _midranks(values):
    """1-based ranks with ties replaced by the mean rank of their group."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(values.size)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def roc_auc(scores, labels=None):
    """Area under the ROC curve via the Mann-Whitney U statistic.

    Accepts either ``roc_auc(pairs)`` with ``(score, label)`` pairs or
    ``roc_auc(scores, labels)``.  Tied scores earn half credit.
    """
    if labels is None:
        pairs = list(scores)
        s = np.array([p[0] for p in pairs], dtype=np.float64)
        y = np.array([p[1] for p in pairs])
    else:
        s = np.asarray(scores, dtype=np.float64)
        y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D sequences of equal length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"ROC-AUC needs both classes (got {n_pos} positive, {n_neg} negative)")
    ranks = _midranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))

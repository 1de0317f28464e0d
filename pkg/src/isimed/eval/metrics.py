"""Classification metrics and the paired t-test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from ..errors import SingleClass, ZeroVariance

METRIC_NAMES = ("auc", "accuracy", "f1", "sensitivity", "specificity")


@dataclass
class MetricsRecord:
    auc: float
    accuracy: float
    f1: float
    sensitivity: float
    specificity: float
    fold: Optional[int] = None
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def as_dict(self):
        return asdict(self)


def _check_labels(labels):
    labels = np.asarray(labels).astype(int).ravel()
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if labels.min() == labels.max():
        raise SingleClass(f"only class {labels[0]} present")
    return labels


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(tie)."""
    labels = _check_labels(labels)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    ranks = rankdata(scores)  # average ranks resolve ties as 1/2
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def classification_metrics(scores, labels, threshold: float = 0.5, fold=None) -> MetricsRecord:
    """Threshold-based metrics (predicted positive iff score >= threshold) plus AUC."""
    labels = _check_labels(labels)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsRecord(
        auc=roc_auc(scores, labels),
        accuracy=(tp + tn) / len(labels),
        f1=f1,
        sensitivity=recall,
        specificity=tn / (tn + fp),
        fold=fold,
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
    )


def _betacf(a, b, x, max_iter=500, tol=1e-15):
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) of Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return betainc_regularized(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Paired t-test on d = a - b; returns (t, two-sided p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples with at least two entries")
    d = a - b
    k = len(d)
    sd = d.std(ddof=1)
    if sd == 0.0 or np.all(d == d[0]):
        raise ZeroVariance("paired differences have zero variance")
    t = d.mean() / (sd / math.sqrt(k))
    return float(t), t_two_sided_p(float(t), k - 1)

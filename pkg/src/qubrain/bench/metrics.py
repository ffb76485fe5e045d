"""Confusion-based metrics, rank AUC, and Tukey boxplot summaries."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

THRESHOLD = 0.5


class UndefinedMetricError(ValueError):
    pass


@dataclass
class Metrics:
    tp: int
    tn: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    auc: float

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(scores, labels, threshold: float = THRESHOLD) -> tuple[int, int, int, int]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    pred = scores > threshold
    pos = labels == 1
    return (int(np.sum(pred & pos)), int(np.sum(~pred & ~pos)),
            int(np.sum(pred & ~pos)), int(np.sum(~pred & pos)))


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def prf1(tp: int, tn: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2 * p * r, p + r)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    rank_sum = _average_ranks(scores)[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pairwise_auc(scores, labels) -> float:
    """O(n^2) pair count; the reference for :func:`roc_auc`."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos, neg = scores[labels == 1], scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (pos.size * neg.size)


def compute_metrics(scores, labels, threshold: float = THRESHOLD) -> Metrics:
    tp, tn, fp, fn = confusion(scores, labels, threshold)
    p, r, f1 = prf1(tp, tn, fp, fn)
    return Metrics(tp, tn, fp, fn, p, r, f1, roc_auc(scores, labels))


@dataclass
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list = field(default_factory=list)
    n: int = 0


def boxplot_stats(values) -> BoxStats:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 4:
        raise ValueError(f"boxplot statistics need at least 4 values, got {v.size}")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = sorted(float(x) for x in v[(v < lo_fence) | (v > hi_fence)])
    return BoxStats(float(med), float(q1), float(q3), float(inside.min()), float(inside.max()), outliers, int(v.size))


SUMMARY_METRICS = ("f1", "auc", "recall", "precision")


def summarize_metrics(model_id: str, metrics: list[Metrics], seeds: list[int]) -> dict:
    """BoxplotSummary document for one model over its seed runs."""
    out = {"schema": "qubrain.summary/1", "model": model_id, "seeds": list(seeds), "metrics": {}}
    for name in SUMMARY_METRICS:
        out["metrics"][name] = asdict(boxplot_stats([getattr(m, name) for m in metrics]))
    return out

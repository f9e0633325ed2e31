"""Classification metrics: accuracy, unweighted average recall, unweighted F1.

UAR is macro recall (per-class recall averaged over the number of classes);
UF1 averages the per-class F1 scores 2*TP_c / (2*TP_c + FP_c + FN_c). Classes
without support contribute 0 to both averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsReport", "compute_metrics"]


@dataclass
class MetricsReport:
    acc: float
    uar: float
    uf1: float
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    support: np.ndarray
    num_classes: int

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "uar": self.uar,
            "uf1": self.uf1,
            "num_classes": self.num_classes,
            "tp": self.tp.tolist(),
            "fp": self.fp.tolist(),
            "fn": self.fn.tolist(),
            "support": self.support.tolist(),
        }


def compute_metrics(labels, predictions, num_classes: int) -> MetricsReport:
    """Per-class confusion counts and the three summary scores."""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape or labels.ndim != 1:
        raise ValueError(
            f"labels and predictions must be equal-length vectors, got "
            f"{labels.shape} vs {predictions.shape}"
        )
    if labels.size == 0:
        raise ValueError("empty label vector")
    for name, v in (("labels", labels), ("predictions", predictions)):
        if v.min() < 0 or v.max() >= num_classes:
            raise ValueError(f"{name} contain classes outside [0, {num_classes})")

    c = num_classes
    tp = np.zeros(c, dtype=np.int64)
    fp = np.zeros(c, dtype=np.int64)
    fn = np.zeros(c, dtype=np.int64)
    support = np.zeros(c, dtype=np.int64)
    for k in range(c):
        support[k] = int((labels == k).sum())
        tp[k] = int(((labels == k) & (predictions == k)).sum())
        fp[k] = int(((labels != k) & (predictions == k)).sum())
        fn[k] = int(((labels == k) & (predictions != k)).sum())

    acc = float(tp.sum() / labels.size)
    recalls = np.where(support > 0, tp / np.maximum(support, 1), 0.0)
    uar = float(recalls.sum() / c)
    f1_den = 2 * tp + fp + fn
    f1 = np.where(f1_den > 0, 2 * tp / np.maximum(f1_den, 1), 0.0)
    uf1 = float(f1.sum() / c)
    return MetricsReport(
        acc=acc, uar=uar, uf1=uf1, tp=tp, fp=fp, fn=fn, support=support, num_classes=c
    )

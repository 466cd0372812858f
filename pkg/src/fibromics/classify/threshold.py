"""Single-feature threshold classifiers.

The decision rule is one cut on one feature, direction chosen freely. The
fit scans every midpoint between consecutive distinct training values in
both directions and keeps the cut maximizing positive-class F1; ties prefer
the widest separating gap, then the lower threshold, then positive-above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError


def _f1_from_counts(tp: float, fp: float, fn: float) -> float:
    denom = 2.0 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


@dataclass(frozen=True)
class ThresholdClassifier:
    threshold: float
    positive_above: bool
    degenerate: bool = False  # constant feature: predicts the majority class
    majority: int = 0
    train_f1: float = 0.0
    feature: str | None = None

    def predict(self, values) -> np.ndarray:
        x = np.asarray(values, dtype=np.float64)
        if self.degenerate:
            return np.full(x.shape, self.majority, dtype=np.int64)
        if self.positive_above:
            return (x > self.threshold).astype(np.int64)
        return (x < self.threshold).astype(np.int64)


def fit_threshold(values, labels, weights=None, feature: str | None = None) -> ThresholdClassifier:
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1 or len(x) == 0:
        raise FitError("values and labels must be equal-length non-empty 1D arrays")
    if not set(np.unique(y)) <= {0, 1}:
        raise FitError("labels must be binary 0/1")
    w = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != x.shape:
        raise FitError("weights must align with values")

    distinct = np.unique(x)
    if len(distinct) < 2:
        w_pos = float(w[y == 1].sum())
        w_neg = float(w[y == 0].sum())
        majority = 1 if w_pos > w_neg else 0
        preds = np.full(len(x), majority)
        tp = float(w[(preds == 1) & (y == 1)].sum())
        fp = float(w[(preds == 1) & (y == 0)].sum())
        fn = float(w[(preds == 0) & (y == 1)].sum())
        return ThresholdClassifier(
            threshold=float(distinct[0]),
            positive_above=True,
            degenerate=True,
            majority=majority,
            train_f1=_f1_from_counts(tp, fp, fn),
            feature=feature,
        )

    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    gaps = distinct[1:] - distinct[:-1]
    best = None  # (f1, gap, -threshold, above, t)
    for t, gap in zip(midpoints, gaps):
        for above in (True, False):
            pred = (x > t) if above else (x < t)
            tp = float(w[pred & (y == 1)].sum())
            fp = float(w[pred & (y == 0)].sum())
            fn = float(w[~pred & (y == 1)].sum())
            score = _f1_from_counts(tp, fp, fn)
            key = (score, gap, -t, above)
            if best is None or key > best[0]:
                best = (key, t, above, score)
    assert best is not None
    _, t, above, score = best
    return ThresholdClassifier(
        threshold=float(t),
        positive_above=bool(above),
        train_f1=float(score),
        feature=feature,
    )

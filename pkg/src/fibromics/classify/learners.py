"""Learner configurations wrapping the scikit-learn estimators.

All learners train with per-sample class weights (majority class weighted
n_minority / n_majority, minority 1.0) and are deterministic under a fixed
random state. The gamma parameter applies to the RBF kernel only; linear
rows record it as n/a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.svm import SVC

from ..errors import FitError

LEARNER_KINDS = ("logreg", "svm_linear", "svm_rbf", "random_forest", "grad_boost")


@dataclass(frozen=True)
class ClassWeights:
    weight_negative: float
    weight_positive: float

    @classmethod
    def from_labels(cls, labels) -> "ClassWeights":
        y = np.asarray(labels, dtype=np.int64)
        n_pos = int((y == 1).sum())
        n_neg = int((y == 0).sum())
        if n_pos == 0 or n_neg == 0:
            raise FitError("class weights need both classes present")
        if n_pos >= n_neg:
            return cls(weight_negative=1.0, weight_positive=n_neg / n_pos)
        return cls(weight_negative=n_pos / n_neg, weight_positive=1.0)

    def sample_weights(self, labels) -> np.ndarray:
        y = np.asarray(labels, dtype=np.int64)
        return np.where(y == 1, self.weight_positive, self.weight_negative)


@dataclass(frozen=True)
class LearnerSpec:
    name: str
    params: tuple[tuple[str, float | int | None], ...] = ()

    def __post_init__(self) -> None:
        if self.name not in LEARNER_KINDS:
            raise FitError(f"unknown learner {self.name!r}")

    def param_dict(self) -> dict:
        return dict(self.params)

    def describe(self) -> str:
        if self.name == "svm_linear":
            parts = [f"{k}={v}" for k, v in self.params]
            parts.append("gamma=n/a")
            return ";".join(parts)
        if not self.params:
            return "-"
        return ";".join(f"{k}={'none' if v is None else v}" for k, v in self.params)


def fit_learner(
    spec: LearnerSpec,
    x: np.ndarray,
    y: np.ndarray,
    weights: ClassWeights,
    random_state: int,
):
    """Fit one configured learner; returns the fitted estimator."""
    if len(np.unique(y)) < 2:
        raise FitError("training data must hold both classes")
    p = spec.param_dict()
    if spec.name == "logreg":
        est = LogisticRegression(
            C=float(p["C"]), solver="lbfgs", max_iter=5000, tol=1e-8
        )
    elif spec.name == "svm_linear":
        est = SVC(kernel="linear", C=float(p["C"]))
    elif spec.name == "svm_rbf":
        est = SVC(kernel="rbf", C=float(p["C"]), gamma=float(p["gamma"]))
    elif spec.name == "random_forest":
        depth = p["max_depth"]
        est = RandomForestClassifier(
            n_estimators=int(p["n_trees"]),
            max_depth=None if depth is None else int(depth),
            random_state=random_state,
        )
    elif spec.name == "grad_boost":
        est = GradientBoostingClassifier(
            n_estimators=int(p["rounds"]),
            max_depth=int(p["max_depth"]),
            learning_rate=float(p["learning_rate"]),
            random_state=random_state,
        )
    else:
        raise FitError(f"unknown learner {spec.name!r}")
    est.fit(x, y, sample_weight=weights.sample_weights(y))
    return est

"""Feature selection and projection strategies for the model grid.

All selectors fit on z-scored training data only. Index ties always break
toward the lower feature index so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LogisticRegression

from ..errors import FitError
from ..stats import mutual_information, mutual_information_pair

SELECTOR_KINDS = ("none", "topk_mi", "mrmr", "stability", "lasso", "pca")

_STABILITY_RUNS = 100
_STABILITY_THRESHOLD = 0.6
_STABILITY_C = 1.0
_LASSO_C_GRID = np.logspace(-3.0, 3.0, 25)


@dataclass(frozen=True)
class SelectorSpec:
    name: str
    params: tuple[tuple[str, float | int], ...] = ()

    def __post_init__(self) -> None:
        if self.name not in SELECTOR_KINDS:
            raise FitError(f"unknown selector {self.name!r}")

    def param_dict(self) -> dict:
        return dict(self.params)

    def describe(self) -> str:
        if not self.params:
            return "-"
        return ";".join(f"{k}={v}" for k, v in self.params)


@dataclass(frozen=True)
class SelectorState:
    """Fitted selector: either a column subset or a linear projection."""

    spec: SelectorSpec
    indices: tuple[int, ...] | None = None
    components: np.ndarray | None = None  # (k, n_features) for pca
    fallback: bool = False  # selection rule found nothing; degraded choice

    @property
    def n_selected(self) -> int:
        if self.components is not None:
            return self.components.shape[0]
        assert self.indices is not None
        return len(self.indices)

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        if self.components is not None:
            return matrix @ self.components.T
        assert self.indices is not None
        return matrix[:, list(self.indices)]


def _top_indices(scores: np.ndarray, k: int) -> tuple[int, ...]:
    order = np.lexsort((np.arange(len(scores)), -scores))
    return tuple(int(i) for i in order[:k])


def _l1_nonzero(x: np.ndarray, y: np.ndarray, c: float, seed: int) -> np.ndarray:
    model = LogisticRegression(
        penalty="l1", C=c, solver="liblinear", max_iter=2000, random_state=seed
    )
    model.fit(x, y)
    return np.flatnonzero(np.abs(model.coef_[0]) > 1e-8)


def _fit_topk_mi(x: np.ndarray, y: np.ndarray, k: int) -> tuple[int, ...]:
    scores = np.array([mutual_information(x[:, j], y) for j in range(x.shape[1])])
    return _top_indices(scores, k)


def _fit_mrmr(x: np.ndarray, y: np.ndarray, k: int) -> tuple[int, ...]:
    n_feat = x.shape[1]
    relevance = np.array([mutual_information(x[:, j], y) for j in range(n_feat)])
    selected = [int(_top_indices(relevance, 1)[0])]
    redundancy_cache: dict[tuple[int, int], float] = {}

    def redundancy(a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        if key not in redundancy_cache:
            redundancy_cache[key] = mutual_information_pair(x[:, a], x[:, b])
        return redundancy_cache[key]

    while len(selected) < k:
        best_j = -1
        best_score = -np.inf
        for j in range(n_feat):
            if j in selected:
                continue
            score = relevance[j] - float(np.mean([redundancy(j, s) for s in selected]))
            if score > best_score:  # ties keep the lower index
                best_score = score
                best_j = j
        selected.append(best_j)
    return tuple(selected)


def _fit_stability(x: np.ndarray, y: np.ndarray, seed: int) -> tuple[tuple[int, ...], bool]:
    rng = np.random.default_rng(seed)
    n = len(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    hits = np.zeros(x.shape[1], dtype=np.int64)
    for run in range(_STABILITY_RUNS):
        # Class-stratified half so every run sees both classes.
        take_pos = max(1, len(pos) // 2)
        take_neg = max(1, len(neg) // 2)
        rows = np.concatenate(
            [
                pos[rng.permutation(len(pos))[:take_pos]],
                neg[rng.permutation(len(neg))[:take_neg]],
            ]
        )
        rows.sort()
        nz = _l1_nonzero(x[rows], y[rows], _STABILITY_C, seed=run)
        hits[nz] += 1
    freq = hits / _STABILITY_RUNS
    keep = np.flatnonzero(freq >= _STABILITY_THRESHOLD)
    if len(keep) == 0:
        return (_top_indices(freq, 1), True)
    return (tuple(int(i) for i in keep), False)


def _fit_lasso(
    x: np.ndarray, y: np.ndarray, target: int, seed: int
) -> tuple[tuple[int, ...], bool]:
    """Largest penalty (smallest C) reaching the target support size."""
    last_nz: np.ndarray | None = None
    for c in _LASSO_C_GRID:
        nz = _l1_nonzero(x, y, float(c), seed)
        if len(nz) >= target:
            return (tuple(int(i) for i in nz), False)
        last_nz = nz
    if last_nz is not None and len(last_nz) > 0:
        return (tuple(int(i) for i in last_nz), True)
    scores = np.array([mutual_information(x[:, j], y) for j in range(x.shape[1])])
    return (_top_indices(scores, 1), True)


def _fit_pca(x: np.ndarray, k: int) -> np.ndarray:
    if k > min(x.shape):
        raise FitError(f"pca needs k <= min(n_samples, n_features), got {k} for {x.shape}")
    # Input is z-scored on this training split, so columns are centered.
    _, _, vt = np.linalg.svd(x, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return comps


def fit_selector(
    spec: SelectorSpec, x: np.ndarray, y: np.ndarray, seed: int
) -> SelectorState:
    n_feat = x.shape[1]
    params = spec.param_dict()
    k = int(params.get("k", 0))
    if spec.name in ("topk_mi", "mrmr", "pca"):
        if k < 1:
            raise FitError(f"{spec.name} needs k >= 1, got {k}")
        if k > n_feat:
            raise FitError(f"{spec.name} k={k} exceeds {n_feat} features")
    if spec.name == "none":
        return SelectorState(spec, indices=tuple(range(n_feat)))
    if spec.name == "topk_mi":
        return SelectorState(spec, indices=_fit_topk_mi(x, y, k))
    if spec.name == "mrmr":
        return SelectorState(spec, indices=_fit_mrmr(x, y, k))
    if spec.name == "stability":
        indices, fallback = _fit_stability(x, y, seed)
        return SelectorState(spec, indices=indices, fallback=fallback)
    if spec.name == "lasso":
        target = int(params.get("target_count", 0))
        if target < 1:
            raise FitError(f"lasso needs target_count >= 1, got {target}")
        if target > n_feat:
            raise FitError(f"lasso target_count={target} exceeds {n_feat} features")
        indices, fallback = _fit_lasso(x, y, target, seed)
        return SelectorState(spec, indices=indices, fallback=fallback)
    if spec.name == "pca":
        return SelectorState(spec, components=_fit_pca(x, k))
    raise FitError(f"unknown selector {spec.name!r}")

"""Two-sample tests, normalization, mutual information, covariate balance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import chi2 as _chi2_dist

from .errors import FitError
from .manifest import CaseRecord

_EXACT_LIMIT = 16


def _midranks(pooled: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled), dtype=np.float64)
    sorted_vals = pooled[order]
    i = 0
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class MwuResult:
    u: float
    p_value: float
    exact: bool


def mann_whitney_u(x, y) -> MwuResult:
    """Two-sided Mann-Whitney U test, U = min(Ux, Uy).

    Exact enumeration when n + m <= 16 and there are no ties; otherwise a
    tie-corrected normal approximation with continuity correction.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise FitError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1
    u2 = n1 * n2 - u1
    u = min(u1, u2)

    has_ties = len(np.unique(pooled)) < n1 + n2
    if n1 + n2 <= _EXACT_LIMIT and not has_ties:
        total = math.comb(n1 + n2, n1)
        count = 0
        npool = n1 + n2
        base = n1 * n2 + n1 * (n1 + 1) / 2.0
        for subset in combinations(range(npool), n1):
            r = sum(subset) + n1  # 1-based rank sum of the chosen positions
            ua = base - r
            if min(ua, n1 * n2 - ua) <= u + 1e-12:
                count += 1
        return MwuResult(u=u, p_value=count / total, exact=True)

    n = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts**3 - tie_counts).sum()))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return MwuResult(u=u, p_value=1.0, exact=False)
    mu = n1 * n2 / 2.0
    z = max(0.0, abs(u - mu) - 0.5) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return MwuResult(u=u, p_value=p, exact=False)


@dataclass(frozen=True)
class Normalizer:
    """Per-feature z-scoring fitted on training data only.

    Constant training features are flagged and transform to exactly 0.
    """

    feature_names: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray
    constant: np.ndarray  # bool per feature


def zscore_fit(matrix, feature_names: tuple[str, ...] | None = None) -> Normalizer:
    if feature_names is None:
        # Accept a FeatureTable-like object directly.
        feature_names = tuple(matrix.feature_names)
        matrix = matrix.matrix
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != len(feature_names):
        raise FitError(f"matrix shape {m.shape} does not match {len(feature_names)} features")
    if m.shape[0] == 0:
        raise FitError("cannot fit a normalizer on zero rows")
    means = m.mean(axis=0)
    if m.shape[0] > 1:
        sds = m.std(axis=0, ddof=1)
    else:
        sds = np.zeros(m.shape[1])
    constant = sds == 0.0
    return Normalizer(tuple(feature_names), means, sds, constant)


def zscore_apply(norm: Normalizer, matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != len(norm.feature_names):
        raise FitError(f"matrix shape {m.shape} does not match the fitted normalizer")
    safe = np.where(norm.constant, 1.0, norm.sds)
    out = (m - norm.means) / safe
    out[:, norm.constant] = 0.0
    return out


def _equal_frequency_bins(x: np.ndarray) -> np.ndarray:
    distinct = len(np.unique(x))
    b = min(10, distinct)
    if b <= 1:
        return np.zeros(len(x), dtype=np.int64)
    edges = np.quantile(x, [k / b for k in range(1, b)])
    return np.searchsorted(edges, x, side="left").astype(np.int64)


def _plugin_mi(xb: np.ndarray, yb: np.ndarray) -> float:
    joint = np.zeros((int(xb.max()) + 1, int(yb.max()) + 1), dtype=np.float64)
    np.add.at(joint, (xb, yb), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float((joint[nz] * np.log(joint[nz] / (px @ py)[nz])).sum())


def mutual_information(values, labels) -> float:
    """Plug-in mutual information (nats) after equal-frequency binning of the
    feature into min(10, distinct values) bins."""
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(labels)
    if len(x) != len(y) or len(x) == 0:
        raise FitError("values and labels must be equal-length and non-empty")
    xb = _equal_frequency_bins(x)
    _, yb = np.unique(y, return_inverse=True)
    return _plugin_mi(xb, yb)


def mutual_information_pair(a, b) -> float:
    """Mutual information (nats) between two continuous features, each
    discretized with the same equal-frequency rule."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if len(xa) != len(xb) or len(xa) == 0:
        raise FitError("features must be equal-length and non-empty")
    return _plugin_mi(_equal_frequency_bins(xa), _equal_frequency_bins(xb))


def _fisher_exact_2x2(table: np.ndarray) -> float:
    """Two-sided Fisher exact p for a 2x2 table (sum of tables at most as
    probable as the observed one, margins fixed)."""
    a, b = int(table[0, 0]), int(table[0, 1])
    c, d = int(table[1, 0]), int(table[1, 1])
    r1, r2 = a + b, c + d
    c1 = a + c
    n = r1 + r2

    def prob(k: int) -> float:
        return (
            math.comb(r1, k) * math.comb(r2, c1 - k) / math.comb(n, c1)
        )

    p_obs = prob(a)
    lo = max(0, c1 - r2)
    hi = min(r1, c1)
    total = 0.0
    for k in range(lo, hi + 1):
        pk = prob(k)
        if pk <= p_obs * (1.0 + 1e-9):
            total += pk
    return min(1.0, total)


@dataclass(frozen=True)
class CovariateResult:
    covariate: str
    test: str
    p_value: float


def _categorical_test(a_vals: list[int], b_vals: list[int]) -> tuple[str, float]:
    levels = sorted(set(a_vals) | set(b_vals))
    if len(levels) < 2:
        return ("chi_square", 1.0)
    table = np.zeros((len(levels), 2), dtype=np.int64)
    for col, vals in enumerate((a_vals, b_vals)):
        for v in vals:
            table[levels.index(v), col] += 1
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row * col / table.sum()
    if table.shape == (2, 2) and (expected < 5).any():
        return ("fisher_exact", _fisher_exact_2x2(table))
    stat = float(((table - expected) ** 2 / expected).sum())
    df = (table.shape[0] - 1) * (table.shape[1] - 1)
    return ("chi_square", float(_chi2_dist.sf(stat, df)))


def compare_covariates(
    group_a: list[CaseRecord], group_b: list[CaseRecord]
) -> list[CovariateResult]:
    """Balance tests between two cohorts: rank test for age, count tests for
    the categorical covariates."""
    if not group_a or not group_b:
        raise FitError("both groups must be non-empty")
    out = []
    mwu = mann_whitney_u(
        [c.age_years for c in group_a], [c.age_years for c in group_b]
    )
    out.append(CovariateResult("age_years", "mann_whitney", mwu.p_value))
    for cov in ("menstrual_status", "adenomyosis", "fat_saturated"):
        test, p = _categorical_test(
            [getattr(c, cov) for c in group_a], [getattr(c, cov) for c in group_b]
        )
        out.append(CovariateResult(cov, test, p))
    return out

"""Exponential-plateau learning curves for segmentation quality vs cohort size.

Model: D(n) = ym - (ym - y0) * exp(-k * n). Fitting runs a multi-start
search (log-spaced k grid, closed-form linear solve for y0 and ym at each k)
followed by damped Gauss-Newton refinement on (y0, ym, log k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError

_K_GRID = np.logspace(-4.0, 1.0, 60)
_MAX_ITER = 500
_TOL = 1e-10


@dataclass(frozen=True)
class PlateauModel:
    y0: float  # predicted quality at n = 0
    ym: float  # asymptotic quality
    k: float  # exponential rate, > 0
    converged: bool = True
    degenerate: bool = False  # constant data; k is arbitrary

    def predict(self, n: np.ndarray | float) -> np.ndarray | float:
        n = np.asarray(n, dtype=np.float64)
        out = self.ym - (self.ym - self.y0) * np.exp(-self.k * n)
        return float(out) if out.ndim == 0 else out


def _linear_solve(n: np.ndarray, y: np.ndarray, k: float) -> tuple[float, float, float]:
    """Best (y0, ym) for fixed k by linear least squares; returns SSE too."""
    e = np.exp(-k * n)
    basis = np.column_stack([e, 1.0 - e])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    resid = basis @ coef - y
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def _sse(n: np.ndarray, y: np.ndarray, y0: float, ym: float, k: float) -> float:
    r = ym - (ym - y0) * np.exp(-k * n) - y
    return float(r @ r)


def fit_plateau(sample_counts, dsc_values) -> PlateauModel:
    """Fit the plateau model to (sample count, quality) points.

    Needs at least 3 points; rejects fits with ym < y0 (decreasing data).
    Constant data returns a degenerate flagged model.
    """
    n = np.asarray(sample_counts, dtype=np.float64)
    y = np.asarray(dsc_values, dtype=np.float64)
    if n.shape != y.shape or n.ndim != 1:
        raise FitError("sample counts and values must be equal-length 1D sequences")
    if len(n) < 3:
        raise FitError(f"need at least 3 points to fit, got {len(n)}")
    if (n <= 0).any():
        raise FitError("sample counts must be positive")
    if len(np.unique(n)) < 3:
        raise FitError("need at least 3 distinct sample counts")
    if not (np.isfinite(n).all() and np.isfinite(y).all()):
        raise FitError("non-finite input")

    if float(y.max() - y.min()) == 0.0:
        return PlateauModel(y0=float(y[0]), ym=float(y[0]), k=1.0, degenerate=True)

    best: tuple[float, float, float, float] | None = None
    for k in _K_GRID:
        y0, ym, sse = _linear_solve(n, y, float(k))
        if best is None or sse < best[3]:
            best = (y0, ym, float(k), sse)
    assert best is not None
    y0, ym, k, sse = best

    log_k = np.log(k)
    converged = False
    for _ in range(_MAX_ITER):
        kk = float(np.exp(log_k))
        e = np.exp(-kk * n)
        r = ym - (ym - y0) * e - y
        jac = np.column_stack([e, 1.0 - e, (ym - y0) * n * e * kk])
        jtj = jac.T @ jac
        jtr = jac.T @ r
        try:
            delta = np.linalg.solve(jtj + 1e-12 * np.eye(3), -jtr)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        improved = False
        for _half in range(40):
            cand = (y0 + step * delta[0], ym + step * delta[1], log_k + step * delta[2])
            cand_sse = _sse(n, y, cand[0], cand[1], float(np.exp(cand[2])))
            if cand_sse <= sse:
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
        new_sse = cand_sse
        y0, ym, log_k = cand
        if abs(sse - new_sse) <= _TOL * max(sse, 1e-300):
            sse = new_sse
            converged = True
            break
        sse = new_sse

    k = float(np.exp(log_k))
    if ym < y0:
        raise FitError(
            f"fitted curve decreases (y0={y0:.4g} > ym={ym:.4g}); "
            "quality must grow with sample count"
        )
    return PlateauModel(y0=float(y0), ym=float(ym), k=k, converged=converged)


def plateau_point(model: PlateauModel, tolerance: float = 0.01) -> int:
    """Smallest integer n with predicted quality >= (1 - tolerance) * ym."""
    if tolerance <= 0:
        raise FitError(f"tolerance must be positive, got {tolerance}")
    if model.ym <= 0:
        raise FitError(f"asymptote must be positive, got {model.ym}")
    gap = model.ym - model.y0
    threshold = tolerance * model.ym
    if gap <= threshold:
        return 0
    return int(np.ceil(np.log(gap / threshold) / model.k))

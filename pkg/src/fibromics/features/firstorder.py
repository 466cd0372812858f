"""First-order intensity statistics over the ROI.

Computed on the continuous (rescaled, resampled) intensities; the entropy
and uniformity terms use the same fixed-bin-width discretization as the
texture matrices. Moments are population moments; skewness and kurtosis
of a constant ROI are 0 by convention, and kurtosis is not excess
(a normal distribution scores 3).
"""

from __future__ import annotations

import numpy as np


def _binned_probabilities(levels: np.ndarray) -> np.ndarray:
    counts = np.bincount(levels)[1:]  # level 0 unused
    total = counts.sum()
    return counts[counts > 0] / total


def firstorder_features(
    intensities: np.ndarray,
    levels: np.ndarray,
    voxel_volume_mm3: float,
) -> dict[str, float]:
    """All 18 first-order features for one ROI."""
    x = np.asarray(intensities, dtype=np.float64)
    n = x.size
    mean = float(x.mean())
    centered = x - mean
    var = float(np.mean(centered**2))
    p10, p25, p50, p75, p90 = (float(v) for v in np.percentile(x, [10, 25, 50, 75, 90]))

    if var > 0:
        sd = np.sqrt(var)
        skew = float(np.mean(centered**3) / sd**3)
        kurt = float(np.mean(centered**4) / var**2)
    else:
        skew = 0.0
        kurt = 0.0

    robust = x[(x >= p10) & (x <= p90)]
    rmad = float(np.abs(robust - robust.mean()).mean()) if robust.size else 0.0

    probs = _binned_probabilities(np.asarray(levels))
    entropy = float(-(probs * np.log2(probs)).sum())
    uniformity = float((probs**2).sum())

    energy = float((x**2).sum())
    return {
        "Energy": energy,
        "TotalEnergy": voxel_volume_mm3 * energy,
        "Entropy": entropy,
        "Minimum": float(x.min()),
        "10Percentile": p10,
        "90Percentile": p90,
        "Maximum": float(x.max()),
        "Mean": mean,
        "Median": p50,
        "InterquartileRange": p75 - p25,
        "Range": float(x.max() - x.min()),
        "MeanAbsoluteDeviation": float(np.abs(centered).mean()),
        "RobustMeanAbsoluteDeviation": rmad,
        "RootMeanSquared": float(np.sqrt((x**2).mean())),
        "Skewness": skew,
        "Kurtosis": kurt,
        "Variance": var,
        "Uniformity": uniformity,
    }

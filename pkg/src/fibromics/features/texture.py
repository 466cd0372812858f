"""Texture features computed from the gray-level matrices.

Per-direction families (GLCM, GLRLM) compute each feature per direction and
report the mean; GLCM directions without any co-occurring pair are dropped.
Entropies use base-2 logs over nonzero probabilities only, so degenerate
distributions score exactly 0. Conventions for single-level or single-voxel
ROIs keep every feature finite: Correlation, Imc2 handled via their flat
limits, Imc1 0, MCC 1, NGTDM Busyness/Contrast 0 and Coarseness 1e6.
"""

from __future__ import annotations

import numpy as np

from .matrices import SparseCounts, TextureMatrices

_COARSENESS_CAP = 1e6


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _glcm_single(P: np.ndarray) -> dict[str, float]:
    ng = P.shape[0]
    p = P / P.sum()
    i = np.arange(1, ng + 1, dtype=np.float64)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    px = p.sum(axis=1)
    ux = float((i * px).sum())
    sig = float(np.sqrt((px * (i - ux) ** 2).sum()))

    ksum = (ii + jj).astype(np.int64).ravel()
    kdiff = np.abs(ii - jj).astype(np.int64).ravel()
    pxaddy = np.bincount(ksum - 2, weights=p.ravel(), minlength=2 * ng - 1)
    pxsuby = np.bincount(kdiff, weights=p.ravel(), minlength=ng)
    ks = np.arange(2, 2 * ng + 1, dtype=np.float64)
    kd = np.arange(0, ng, dtype=np.float64)

    autocorr = float((p * ii * jj).sum())
    shift = ii + jj - 2 * ux
    contrast = float((p * (ii - jj) ** 2).sum())
    if sig > 0:
        correlation = (autocorr - ux * ux) / (sig * sig)
    else:
        correlation = 1.0
    da = float((kd * pxsuby).sum())

    hxy = _entropy(p.ravel())
    hx = _entropy(px)
    pxpy = np.outer(px, px)
    mask_joint = p > 0
    hxy1 = float(-(p[mask_joint] * np.log2(pxpy[mask_joint])).sum())
    hxy2 = _entropy(pxpy.ravel())
    imc1 = (hxy - hxy1) / hx if hx > 0 else 0.0
    imc2 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - hxy)))))

    present = np.flatnonzero(px > 0)
    if len(present) < 2:
        mcc = 1.0
    else:
        sub = p[np.ix_(present, present)]
        dhalf = 1.0 / np.sqrt(px[present])
        m = sub * dhalf[:, None] * dhalf[None, :]
        eig = np.sort(np.linalg.eigvalsh(m) ** 2)
        mcc = float(np.sqrt(max(0.0, eig[-2])))

    return {
        "Autocorrelation": autocorr,
        "ClusterProminence": float((p * shift**4).sum()),
        "ClusterShade": float((p * shift**3).sum()),
        "ClusterTendency": float((p * shift**2).sum()),
        "Contrast": contrast,
        "Correlation": float(correlation),
        "DifferenceAverage": da,
        "DifferenceEntropy": _entropy(pxsuby),
        "DifferenceVariance": float((pxsuby * (kd - da) ** 2).sum()),
        "Id": float((pxsuby / (1.0 + kd)).sum()),
        "Idm": float((pxsuby / (1.0 + kd**2)).sum()),
        "Idmn": float((pxsuby / (1.0 + kd**2 / ng**2)).sum()),
        "Idn": float((pxsuby / (1.0 + kd / ng)).sum()),
        "Imc1": float(imc1),
        "Imc2": imc2,
        "InverseVariance": float((pxsuby[1:] / kd[1:] ** 2).sum()) if ng > 1 else 0.0,
        "JointAverage": ux,
        "JointEnergy": float((p**2).sum()),
        "JointEntropy": hxy,
        "MCC": mcc,
        "MaximumProbability": float(p.max()),
        "SumAverage": float((ks * pxaddy).sum()),
        "SumEntropy": _entropy(pxaddy),
        "SumSquares": float((p * (ii - ux) ** 2).sum()),
    }


def glcm_features(mats: TextureMatrices, level_counts: np.ndarray) -> dict[str, float]:
    """Mean per-direction GLCM features; directions without pairs are dropped.

    A ROI with no co-occurring pair in any direction falls back to the
    diagonal matrix of the gray-level distribution (level_counts).
    """
    nonempty = [m for m in mats.glcm if m.sum() > 0]
    if not nonempty:
        nonempty = [np.diag(level_counts.astype(np.float64))]
    per = [_glcm_single(m.astype(np.float64)) for m in nonempty]
    return {k: float(np.mean([f[k] for f in per])) for k in per[0]}


def _weighted_stats(i: np.ndarray, s: np.ndarray, c: np.ndarray):
    """Common run/zone/dependence sums: totals, normalized p, marginals."""
    n = c.sum()
    p = c / n
    mu_i = float((p * i).sum())
    mu_s = float((p * s).sum())
    return n, p, mu_i, mu_s


def _rlm_style(sc: SparseCounts, n_voxels: int, names: dict[str, str]) -> dict[str, float]:
    """The 16-feature family shared by GLRLM and GLSZM, with family naming."""
    i = sc.levels.astype(np.float64)
    s = sc.seconds.astype(np.float64)
    c = sc.counts.astype(np.float64)
    n, p, mu_i, mu_s = _weighted_stats(i, s, c)
    sum_by_level = np.bincount(sc.levels, weights=c)
    sum_by_second = np.bincount(sc.seconds, weights=c)
    return {
        names["sre"]: float((c / s**2).sum() / n),
        names["lre"]: float((c * s**2).sum() / n),
        names["gln"]: float((sum_by_level**2).sum() / n),
        names["glnn"]: float((sum_by_level**2).sum() / n**2),
        names["rln"]: float((sum_by_second**2).sum() / n),
        names["rlnn"]: float((sum_by_second**2).sum() / n**2),
        names["rp"]: float(n / n_voxels),
        names["glv"]: float((p * (i - mu_i) ** 2).sum()),
        names["rv"]: float((p * (s - mu_s) ** 2).sum()),
        names["re"]: _entropy(p),
        names["lgre"]: float((c / i**2).sum() / n),
        names["hgre"]: float((c * i**2).sum() / n),
        names["srlge"]: float((c / (i**2 * s**2)).sum() / n),
        names["srhge"]: float((c * i**2 / s**2).sum() / n),
        names["lrlge"]: float((c * s**2 / i**2).sum() / n),
        names["lrhge"]: float((c * i**2 * s**2).sum() / n),
    }


_GLRLM_NAMES = {
    "sre": "ShortRunEmphasis",
    "lre": "LongRunEmphasis",
    "gln": "GrayLevelNonUniformity",
    "glnn": "GrayLevelNonUniformityNormalized",
    "rln": "RunLengthNonUniformity",
    "rlnn": "RunLengthNonUniformityNormalized",
    "rp": "RunPercentage",
    "glv": "GrayLevelVariance",
    "rv": "RunVariance",
    "re": "RunEntropy",
    "lgre": "LowGrayLevelRunEmphasis",
    "hgre": "HighGrayLevelRunEmphasis",
    "srlge": "ShortRunLowGrayLevelEmphasis",
    "srhge": "ShortRunHighGrayLevelEmphasis",
    "lrlge": "LongRunLowGrayLevelEmphasis",
    "lrhge": "LongRunHighGrayLevelEmphasis",
}

_GLSZM_NAMES = {
    "sre": "SmallAreaEmphasis",
    "lre": "LargeAreaEmphasis",
    "gln": "GrayLevelNonUniformity",
    "glnn": "GrayLevelNonUniformityNormalized",
    "rln": "SizeZoneNonUniformity",
    "rlnn": "SizeZoneNonUniformityNormalized",
    "rp": "ZonePercentage",
    "glv": "GrayLevelVariance",
    "rv": "ZoneVariance",
    "re": "ZoneEntropy",
    "lgre": "LowGrayLevelZoneEmphasis",
    "hgre": "HighGrayLevelZoneEmphasis",
    "srlge": "SmallAreaLowGrayLevelEmphasis",
    "srhge": "SmallAreaHighGrayLevelEmphasis",
    "lrlge": "LargeAreaLowGrayLevelEmphasis",
    "lrhge": "LargeAreaHighGrayLevelEmphasis",
}


def glrlm_features(mats: TextureMatrices) -> dict[str, float]:
    per = [_rlm_style(sc, mats.n_voxels, _GLRLM_NAMES) for sc in mats.glrlm]
    return {k: float(np.mean([f[k] for f in per])) for k in per[0]}


def glszm_features(mats: TextureMatrices) -> dict[str, float]:
    return _rlm_style(mats.glszm, mats.n_voxels, _GLSZM_NAMES)


def gldm_features(mats: TextureMatrices) -> dict[str, float]:
    sc = mats.gldm
    i = sc.levels.astype(np.float64)
    j = sc.seconds.astype(np.float64)
    c = sc.counts.astype(np.float64)
    n, p, mu_i, mu_j = _weighted_stats(i, j, c)
    sum_by_level = np.bincount(sc.levels, weights=c)
    sum_by_dep = np.bincount(sc.seconds, weights=c)
    return {
        "DependenceEntropy": _entropy(p),
        "DependenceNonUniformity": float((sum_by_dep**2).sum() / n),
        "DependenceNonUniformityNormalized": float((sum_by_dep**2).sum() / n**2),
        "DependenceVariance": float((p * (j - mu_j) ** 2).sum()),
        "GrayLevelNonUniformity": float((sum_by_level**2).sum() / n),
        "GrayLevelVariance": float((p * (i - mu_i) ** 2).sum()),
        "HighGrayLevelEmphasis": float((c * i**2).sum() / n),
        "LargeDependenceEmphasis": float((c * j**2).sum() / n),
        "LargeDependenceHighGrayLevelEmphasis": float((c * i**2 * j**2).sum() / n),
        "LargeDependenceLowGrayLevelEmphasis": float((c * j**2 / i**2).sum() / n),
        "LowGrayLevelEmphasis": float((c / i**2).sum() / n),
        "SmallDependenceEmphasis": float((c / j**2).sum() / n),
        "SmallDependenceHighGrayLevelEmphasis": float((c * i**2 / j**2).sum() / n),
        "SmallDependenceLowGrayLevelEmphasis": float((c / (i**2 * j**2)).sum() / n),
    }


def ngtdm_features(mats: TextureMatrices) -> dict[str, float]:
    n_i = mats.ngtdm_counts.astype(np.float64)
    s_i = mats.ngtdm_s.astype(np.float64)
    nvp = float(n_i.sum())
    if nvp == 0:
        return {
            "Busyness": 0.0,
            "Coarseness": _COARSENESS_CAP,
            "Complexity": 0.0,
            "Contrast": 0.0,
            "Strength": 0.0,
        }
    p = n_i / nvp
    levels = np.arange(1, len(n_i) + 1, dtype=np.float64)
    present = p > 0
    ngp = int(present.sum())
    pi, si, gi = p[present], s_i[present], levels[present]

    coarse_den = float((pi * si).sum())
    coarseness = 1.0 / coarse_den if coarse_den != 0 else _COARSENESS_CAP

    if ngp > 1:
        gdiff = gi[:, None] - gi[None, :]
        contrast = (
            float((pi[:, None] * pi[None, :] * gdiff**2).sum())
            / (ngp * (ngp - 1))
            * float(s_i.sum() / nvp)
        )
        busy_den = float(np.abs(gi[:, None] * pi[:, None] - gi[None, :] * pi[None, :]).sum())
        busyness = float((pi * si).sum()) / busy_den if busy_den != 0 else 0.0
        pis = pi * si
        complexity = (
            float((np.abs(gdiff) * (pis[:, None] + pis[None, :]) / (pi[:, None] + pi[None, :])).sum())
            / nvp
        )
        s_sum = float(s_i.sum())
        strength = (
            float(((pi[:, None] + pi[None, :]) * gdiff**2).sum()) / s_sum if s_sum != 0 else 0.0
        )
    else:
        contrast = 0.0
        busyness = 0.0
        complexity = 0.0
        strength = 0.0
    return {
        "Busyness": busyness,
        "Coarseness": coarseness,
        "Complexity": complexity,
        "Contrast": contrast,
        "Strength": strength,
    }

"""Segmentation agreement: Dice coefficients, components, instance matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import GeometryError
from .nifti import LabelGrid, same_geometry

_STRUCT_26 = np.ones((3, 3, 3), dtype=bool)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient of two binary masks; two empty masks agree perfectly."""
    if a.shape != b.shape:
        raise GeometryError(f"mask shapes disagree: {a.shape} vs {b.shape}")
    a = a.astype(bool)
    b = b.astype(bool)
    na = int(a.sum())
    nb = int(b.sum())
    if na + nb == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return 2.0 * inter / (na + nb)


def connected_components(mask: np.ndarray) -> np.ndarray:
    """26-connected components labeled 1..K in first-voxel scan order.

    Scan order is x fastest, matching on-disk voxel order.
    """
    labeled, k = ndimage.label(np.asarray(mask).astype(bool), structure=_STRUCT_26)
    if k == 0:
        return labeled.astype(np.int32)
    flat = labeled.ravel(order="F")
    first = np.full(k + 1, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    np.minimum.at(first, flat[idx], idx)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(k + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, k + 1, dtype=np.int32)
    return remap[labeled]


@dataclass(frozen=True)
class InstanceMatch:
    """One manual instance paired to its best-overlapping predicted component."""

    instance_label: int
    component: int | None  # None when nothing overlaps
    dsc: float


def cross_match(manual: LabelGrid, predicted: np.ndarray) -> list[InstanceMatch]:
    """Pair each manual instance with the predicted 26-connected component of
    highest Dice; ties go to the lower component id."""
    if manual.shape != predicted.shape:
        raise GeometryError(f"shapes disagree: {manual.shape} vs {predicted.shape}")
    comps = connected_components(predicted)
    n_comp = int(comps.max())
    matches: list[InstanceMatch] = []
    for label in manual.labels():
        inst = manual.data == label
        best_comp: int | None = None
        best_dsc = 0.0
        for comp_id in range(1, n_comp + 1):
            comp = comps == comp_id
            d = dice(inst, comp)
            if d > best_dsc:
                best_dsc = d
                best_comp = comp_id
        matches.append(InstanceMatch(label, best_comp, best_dsc))
    return matches


@dataclass(frozen=True)
class AgreementSummary:
    n: int
    mean: float
    ci_low: float
    ci_high: float


def summarize(dscs: list[float]) -> AgreementSummary:
    """Mean Dice with a 1.96-sigma normal interval, truncated to [0, 1]."""
    if not dscs:
        raise ValueError("no Dice values to summarize")
    arr = np.asarray(dscs, dtype=np.float64)
    mean = float(arr.mean())
    if len(arr) > 1:
        half = 1.96 * float(arr.std(ddof=1))
    else:
        half = 0.0
    return AgreementSummary(
        n=len(arr),
        mean=mean,
        ci_low=max(0.0, mean - half),
        ci_high=min(1.0, mean + half),
    )

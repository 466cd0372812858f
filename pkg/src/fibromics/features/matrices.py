"""Gray-level co-occurrence, run, zone, dependence, and tone matrices.

All five matrices are built from a dense level array (0 outside the ROI,
1..Ng inside). Neighborhoods are 26-connected; paired directions use the 13
unique 3D offsets at Chebyshev distance 1 with the first nonzero component
positive. Voxels outside the ROI never contribute as neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..preprocess import DiscretizedRoi

DIRECTIONS_13: tuple[tuple[int, int, int], ...] = (
    (0, 0, 1),
    (0, 1, -1),
    (0, 1, 0),
    (0, 1, 1),
    (1, -1, -1),
    (1, -1, 0),
    (1, -1, 1),
    (1, 0, -1),
    (1, 0, 0),
    (1, 0, 1),
    (1, 1, -1),
    (1, 1, 0),
    (1, 1, 1),
)

OFFSETS_26: tuple[tuple[int, int, int], ...] = tuple(
    d for base in DIRECTIONS_13 for d in (base, tuple(-c for c in base))
)

_STRUCT_26 = np.ones((3, 3, 3), dtype=bool)


def _pair_slices(shape: tuple[int, ...], d: tuple[int, int, int]):
    """Slices (src, dst) such that arr[src] and arr[dst] align voxel v with
    voxel v + d."""
    src: list[slice] = []
    dst: list[slice] = []
    for a in range(3):
        if d[a] == 0:
            src.append(slice(None))
            dst.append(slice(None))
        elif d[a] > 0:
            src.append(slice(0, shape[a] - d[a]))
            dst.append(slice(d[a], None))
        else:
            src.append(slice(-d[a], None))
            dst.append(slice(0, shape[a] + d[a]))
    return tuple(src), tuple(dst)


def _plane(arr: np.ndarray, axis: int, index: int) -> np.ndarray:
    sl: list = [slice(None), slice(None), slice(None)]
    sl[axis] = index
    return arr[tuple(sl)]


@dataclass(frozen=True)
class SparseCounts:
    """Integer counts over (gray level, second index) pairs."""

    levels: np.ndarray  # 1..Ng
    seconds: np.ndarray  # run length / zone size / dependence
    counts: np.ndarray

    def total(self) -> int:
        return int(self.counts.sum())

    def dense(self, n_levels: int, n_seconds: int | None = None) -> np.ndarray:
        if n_seconds is None:
            n_seconds = int(self.seconds.max()) if len(self.seconds) else 1
        out = np.zeros((n_levels, n_seconds), dtype=np.int64)
        out[self.levels - 1, self.seconds - 1] = self.counts
        return out


@dataclass(frozen=True)
class TextureMatrices:
    """All matrix statistics for one ROI."""

    n_levels: int
    n_voxels: int
    glcm: tuple[np.ndarray, ...]  # per direction, symmetric integer counts
    glrlm: tuple[SparseCounts, ...]  # per direction
    glszm: SparseCounts
    gldm: SparseCounts
    ngtdm_counts: np.ndarray  # n_i per level, voxels with >= 1 in-ROI neighbor
    ngtdm_s: np.ndarray  # s_i per level


def _pairs_to_sparse(levels: np.ndarray, seconds: np.ndarray) -> SparseCounts:
    if len(levels) == 0:
        return SparseCounts(
            np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        )
    smax = int(seconds.max())
    key = (levels.astype(np.int64) - 1) * smax + (seconds.astype(np.int64) - 1)
    counts = np.bincount(key, minlength=0)
    nz = np.flatnonzero(counts)
    return SparseCounts(
        levels=(nz // smax + 1).astype(np.int64),
        seconds=(nz % smax + 1).astype(np.int64),
        counts=counts[nz].astype(np.int64),
    )


def glcm_matrices(lv: np.ndarray, n_levels: int) -> tuple[np.ndarray, ...]:
    """Symmetric co-occurrence counts at distance 1, one matrix per direction."""
    out = []
    for d in DIRECTIONS_13:
        src, dst = _pair_slices(lv.shape, d)
        a = lv[src].ravel()
        b = lv[dst].ravel()
        valid = (a > 0) & (b > 0)
        key = a[valid].astype(np.int64) * (n_levels + 1) + b[valid]
        counts = np.bincount(key, minlength=(n_levels + 1) ** 2)
        mat = counts.reshape(n_levels + 1, n_levels + 1)[1:, 1:]
        out.append(mat + mat.T)
    return tuple(out)


def glrlm_matrices(lv: np.ndarray, n_levels: int) -> tuple[SparseCounts, ...]:
    """Run-length counts (maximal same-level runs), one per direction."""
    shape = lv.shape
    out = []
    for d in DIRECTIONS_13:
        primary = next(a for a in range(3) if d[a] != 0)
        rest = [a for a in range(3) if a != primary]
        # In-plane alignment between consecutive planes along the primary axis.
        cur_sl: list[slice] = []
        nxt_sl: list[slice] = []
        for a in rest:
            da = d[a]
            if da == 0:
                cur_sl.append(slice(None))
                nxt_sl.append(slice(None))
            elif da > 0:
                cur_sl.append(slice(0, shape[a] - da))
                nxt_sl.append(slice(da, None))
            else:
                cur_sl.append(slice(-da, None))
                nxt_sl.append(slice(0, shape[a] + da))
        cur_t, nxt_t = tuple(cur_sl), tuple(nxt_sl)

        remaining = (lv > 0).astype(np.int64)
        for i in range(shape[primary] - 2, -1, -1):
            cur_lv = _plane(lv, primary, i)[cur_t]
            nxt_lv = _plane(lv, primary, i + 1)[nxt_t]
            eq = (cur_lv > 0) & (cur_lv == nxt_lv)
            view = _plane(remaining, primary, i)[cur_t]
            view[eq] += _plane(remaining, primary, i + 1)[nxt_t][eq]

        start = lv > 0
        src, dst = _pair_slices(shape, d)
        prev_eq = (lv[src] == lv[dst]) & (lv[src] > 0)
        start_dst = start[dst].copy()
        start_dst[prev_eq] = False
        start_full = start.copy()
        start_full[dst] = start_dst
        out.append(_pairs_to_sparse(lv[start_full], remaining[start_full]))
    return tuple(out)


def glszm_matrix(lv: np.ndarray, n_levels: int) -> SparseCounts:
    """Zone counts: 26-connected components of equal level."""
    levels: list[np.ndarray] = []
    sizes: list[np.ndarray] = []
    for g in range(1, n_levels + 1):
        binary = lv == g
        if not binary.any():
            continue
        labeled, k = ndimage.label(binary, structure=_STRUCT_26)
        zone_sizes = np.bincount(labeled.ravel())[1:]
        levels.append(np.full(k, g, dtype=np.int64))
        sizes.append(zone_sizes.astype(np.int64))
    lv_all = np.concatenate(levels) if levels else np.zeros(0, dtype=np.int64)
    sz_all = np.concatenate(sizes) if sizes else np.zeros(0, dtype=np.int64)
    return _pairs_to_sparse(lv_all, sz_all)


def gldm_matrix(lv: np.ndarray, n_levels: int) -> SparseCounts:
    """Dependence counts with alpha = 0: column j = equal-level 26-neighbors + 1."""
    dep = np.zeros(lv.shape, dtype=np.int64)
    for d in OFFSETS_26:
        src, dst = _pair_slices(lv.shape, d)
        eq = (lv[src] > 0) & (lv[src] == lv[dst])
        view = dep[src]
        view[eq] += 1
    roi = lv > 0
    return _pairs_to_sparse(lv[roi], dep[roi] + 1)


def ngtdm_arrays(lv: np.ndarray, n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-level counts n_i and summed absolute tone differences s_i.

    Only voxels with at least one in-ROI 26-neighbor participate.
    """
    nsum = np.zeros(lv.shape, dtype=np.float64)
    ncnt = np.zeros(lv.shape, dtype=np.int64)
    for d in OFFSETS_26:
        src, dst = _pair_slices(lv.shape, d)
        nb_in = lv[dst] > 0
        view_sum = nsum[src]
        view_cnt = ncnt[src]
        view_sum[nb_in] += lv[dst][nb_in]
        view_cnt[nb_in] += 1
    valid = (lv > 0) & (ncnt > 0)
    counts = np.zeros(n_levels, dtype=np.int64)
    s = np.zeros(n_levels, dtype=np.float64)
    if valid.any():
        g = lv[valid]
        diff = np.abs(g - nsum[valid] / ncnt[valid])
        counts = np.bincount(g - 1, minlength=n_levels)
        s = np.bincount(g - 1, weights=diff, minlength=n_levels)
    return counts, s


def compute_matrices(roi: DiscretizedRoi) -> TextureMatrices:
    """Build all texture matrices for one discretized ROI."""
    lv, _offset = roi.dense_levels()
    ng = roi.n_levels
    counts, s = ngtdm_arrays(lv, ng)
    return TextureMatrices(
        n_levels=ng,
        n_voxels=roi.size,
        glcm=glcm_matrices(lv, ng),
        glrlm=glrlm_matrices(lv, ng),
        glszm=glszm_matrix(lv, ng),
        gldm=gldm_matrix(lv, ng),
        ngtdm_counts=counts,
        ngtdm_s=s,
    )

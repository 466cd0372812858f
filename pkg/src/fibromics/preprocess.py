"""Intensity normalization, resampling, and gray-level discretization.

The fixed order is: clip the volume at a high percentile, rescale to a byte
range, resample to the target spacing (cubic B-spline for images, nearest
neighbor for label masks), then discretize ROI intensities with a fixed bin
width anchored at the ROI minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ExtractionError, GeometryError
from .nifti import LabelGrid, VoxelGrid


@dataclass(frozen=True)
class PreprocessConfig:
    clip_percentile: float = 99.9
    rescale_max: float = 255.0
    target_spacing: tuple[float, float, float] = (0.75, 0.75, 5.0)
    bin_width: float = 25.0

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_percentile <= 100.0:
            raise ExtractionError(f"clip_percentile out of (0, 100]: {self.clip_percentile}")
        if self.rescale_max <= 0:
            raise ExtractionError(f"rescale_max must be positive: {self.rescale_max}")
        if any(s <= 0 for s in self.target_spacing):
            raise ExtractionError(f"target_spacing must be positive: {self.target_spacing}")
        if self.bin_width <= 0:
            raise ExtractionError(f"bin_width must be positive: {self.bin_width}")


def clip_and_rescale(grid: VoxelGrid, config: PreprocessConfig) -> VoxelGrid:
    """Clip above the per-volume percentile, then map [min, clipped max]
    linearly onto [0, rescale_max]. Constant volumes map to all zeros."""
    data = grid.data.astype(np.float64)
    ceiling = float(np.percentile(data, config.clip_percentile))
    clipped = np.minimum(data, ceiling)
    lo = float(clipped.min())
    hi = float(clipped.max())
    if hi == lo:
        out = np.zeros_like(clipped)
    else:
        out = (clipped - lo) * (config.rescale_max / (hi - lo))
    return VoxelGrid(out, grid.spacing, grid.origin)


def _output_dims(
    shape: tuple[int, int, int],
    spacing: tuple[float, float, float],
    target: tuple[float, float, float],
) -> tuple[int, int, int]:
    return tuple(
        int(np.ceil(shape[a] * spacing[a] / target[a])) for a in range(3)
    )  # type: ignore[return-value]


def _sample_coords(
    out_dims: tuple[int, int, int],
    spacing: tuple[float, float, float],
    target: tuple[float, float, float],
) -> list[np.ndarray]:
    """Fractional source indices of each output voxel center, per axis.

    Grids share the world position of voxel 0, so output index j sits at
    source index j * target / spacing along each axis.
    """
    axes = [
        np.arange(out_dims[a], dtype=np.float64) * (target[a] / spacing[a])
        for a in range(3)
    ]
    return list(np.meshgrid(*axes, indexing="ij"))


def resample(grid: VoxelGrid, target_spacing: tuple[float, float, float]) -> VoxelGrid:
    """Resample a scalar volume to target_spacing with an interpolating
    cubic B-spline (mirror boundary)."""
    if any(s <= 0 for s in target_spacing):
        raise GeometryError(f"target spacing must be positive: {target_spacing}")
    out_dims = _output_dims(grid.shape, grid.spacing, target_spacing)
    coords = _sample_coords(out_dims, grid.spacing, target_spacing)
    out = ndimage.map_coordinates(
        grid.data.astype(np.float64), coords, order=3, mode="mirror", prefilter=True
    )
    return VoxelGrid(out, tuple(float(t) for t in target_spacing), grid.origin)


def resample_labels(grid: LabelGrid, target_spacing: tuple[float, float, float]) -> LabelGrid:
    """Resample a label mask to target_spacing by nearest neighbor; never
    invents labels absent from the input."""
    if any(s <= 0 for s in target_spacing):
        raise GeometryError(f"target spacing must be positive: {target_spacing}")
    out_dims = _output_dims(grid.shape, grid.spacing, target_spacing)
    coords = _sample_coords(out_dims, grid.spacing, target_spacing)
    out = ndimage.map_coordinates(grid.data, coords, order=0, mode="nearest")
    return LabelGrid(out.astype(grid.data.dtype), tuple(float(t) for t in target_spacing), grid.origin)


@dataclass(frozen=True)
class DiscretizedRoi:
    """One tumor instance after preprocessing, ready for feature computation.

    coords are [n, 3] voxel indices into the resampled grid; intensities are
    the matching continuous values; levels the discretized gray levels in
    1..n_levels.
    """

    coords: np.ndarray
    intensities: np.ndarray
    levels: np.ndarray
    n_levels: int
    spacing: tuple[float, float, float]
    bin_width: float

    def __post_init__(self) -> None:
        if len(self.coords) == 0:
            raise ExtractionError("ROI holds no voxels")
        if not (len(self.coords) == len(self.intensities) == len(self.levels)):
            raise ExtractionError("ROI arrays disagree in length")

    @property
    def size(self) -> int:
        return len(self.coords)

    def dense_levels(self) -> tuple[np.ndarray, tuple[int, int, int]]:
        """Levels on the ROI bounding box, 0 outside the ROI; also returns
        the box offset."""
        lo = self.coords.min(axis=0)
        hi = self.coords.max(axis=0)
        shape = tuple(int(h - l + 1) for l, h in zip(lo, hi))
        dense = np.zeros(shape, dtype=np.int32)
        rel = self.coords - lo
        dense[rel[:, 0], rel[:, 1], rel[:, 2]] = self.levels
        return dense, tuple(int(v) for v in lo)  # type: ignore[return-value]


def discretize(
    image: VoxelGrid, mask: LabelGrid, label: int, bin_width: float
) -> DiscretizedRoi:
    """Bin the ROI of one instance with fixed-width bins anchored at the ROI
    minimum: level = floor((I - min) / width) + 1."""
    if bin_width <= 0:
        raise ExtractionError(f"bin_width must be positive: {bin_width}")
    if image.shape != mask.shape:
        raise GeometryError(f"image {image.shape} and mask {mask.shape} disagree")
    sel = mask.data == label
    if not sel.any():
        raise ExtractionError(f"label {label} is empty in the mask")
    coords = np.argwhere(sel)
    vals = image.data[sel].astype(np.float64)
    lo = float(vals.min())
    levels = np.floor((vals - lo) / bin_width).astype(np.int64) + 1
    return DiscretizedRoi(
        coords=coords,
        intensities=vals,
        levels=levels,
        n_levels=int(levels.max()),
        spacing=image.spacing,
        bin_width=float(bin_width),
    )

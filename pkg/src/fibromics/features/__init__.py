"""Radiomic feature extraction: 107 features per tumor instance.

The census is fixed: 14 shape, 18 first-order, 24 GLCM, 16 GLRLM, 16 GLSZM,
14 GLDM, 5 NGTDM. Canonical names and order ship in feature_names.txt and
are verified, together with finiteness, on every extraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from ..errors import ExtractionError, GeometryError
from ..nifti import LabelGrid, VoxelGrid
from ..preprocess import (
    DiscretizedRoi,
    PreprocessConfig,
    clip_and_rescale,
    discretize,
    resample,
    resample_labels,
)
from .firstorder import firstorder_features
from .matrices import TextureMatrices, compute_matrices
from .shape import shape_features
from .texture import (
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
    ngtdm_features,
)

FAMILY_COUNTS = {
    "shape": 14,
    "firstorder": 18,
    "glcm": 24,
    "glrlm": 16,
    "glszm": 16,
    "gldm": 14,
    "ngtdm": 5,
}
TOTAL_FEATURES = 107


@lru_cache(maxsize=1)
def feature_names() -> tuple[str, ...]:
    """The canonical 107 feature names, in output order."""
    text = resources.files(__package__).joinpath("feature_names.txt").read_text("utf-8")
    names = tuple(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )
    validate_census(names)
    return names


def validate_census(names: tuple[str, ...] | list[str]) -> None:
    """Check the name list matches the fixed per-family census exactly."""
    if len(names) != TOTAL_FEATURES:
        raise ExtractionError(f"feature census broken: {len(names)} != {TOTAL_FEATURES}")
    seen: dict[str, int] = {}
    for name in names:
        family = name.split("_", 1)[0]
        seen[family] = seen.get(family, 0) + 1
    if seen != FAMILY_COUNTS:
        raise ExtractionError(f"feature census broken: {seen} != {FAMILY_COUNTS}")


@dataclass(frozen=True)
class FeatureVector:
    """One instance's features, aligned with feature_names()."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        validate_census(self.names)
        if self.values.shape != (len(self.names),):
            raise ExtractionError(
                f"feature vector length {self.values.shape} != {len(self.names)}"
            )
        if not np.isfinite(self.values).all():
            bad = [self.names[i] for i in np.flatnonzero(~np.isfinite(self.values))]
            raise ExtractionError(f"non-finite feature values: {bad}")

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise KeyError(name) from None

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def _assemble(families: dict[str, dict[str, float]]) -> FeatureVector:
    names = feature_names()
    values = np.empty(len(names), dtype=np.float64)
    for idx, name in enumerate(names):
        family, short = name.split("_", 1)
        try:
            values[idx] = families[family][short]
        except KeyError:
            raise ExtractionError(f"feature {name} missing from extraction") from None
    return FeatureVector(names, values)


def extract_instance(
    image: VoxelGrid,
    mask: LabelGrid,
    label: int,
    config: PreprocessConfig,
) -> FeatureVector:
    """Extract all 107 features for one labeled instance.

    Pipeline: per-volume clip and rescale, joint resample to the target
    spacing (B-spline image, nearest mask), then shape on the binary mask
    and intensity/texture families on the discretized ROI.
    """
    if image.shape != mask.shape or any(
        abs(a - b) > 1e-3 for a, b in zip(image.spacing, mask.spacing)
    ):
        raise GeometryError(
            f"image and mask disagree: shapes {image.shape}/{mask.shape}, "
            f"spacings {image.spacing}/{mask.spacing}"
        )
    if label not in mask.labels():
        raise ExtractionError(f"label {label} not present in mask")

    rescaled = clip_and_rescale(image, config)
    image_rs = resample(rescaled, config.target_spacing)
    mask_rs = resample_labels(mask, config.target_spacing)
    binary = mask_rs.data == label
    if not binary.any():
        raise ExtractionError(f"label {label} vanished during resampling")

    roi = discretize(image_rs, mask_rs, label, config.bin_width)
    mats = compute_matrices(roi)
    level_counts = np.bincount(roi.levels, minlength=roi.n_levels + 1)[1:]
    voxvol = float(np.prod(config.target_spacing))
    families = {
        "shape": shape_features(binary, config.target_spacing),
        "firstorder": firstorder_features(roi.intensities, roi.levels, voxvol),
        "glcm": glcm_features(mats, level_counts),
        "glrlm": glrlm_features(mats),
        "glszm": glszm_features(mats),
        "gldm": gldm_features(mats),
        "ngtdm": ngtdm_features(mats),
    }
    return _assemble(families)


def features_from_roi(roi: DiscretizedRoi, binary: np.ndarray) -> FeatureVector:
    """Assemble the full vector from an already-prepared ROI (testing hook)."""
    mats = compute_matrices(roi)
    level_counts = np.bincount(roi.levels, minlength=roi.n_levels + 1)[1:]
    voxvol = float(np.prod(roi.spacing))
    families = {
        "shape": shape_features(binary, roi.spacing),
        "firstorder": firstorder_features(roi.intensities, roi.levels, voxvol),
        "glcm": glcm_features(mats, level_counts),
        "glrlm": glrlm_features(mats),
        "glszm": glszm_features(mats),
        "gldm": gldm_features(mats),
        "ngtdm": ngtdm_features(mats),
    }
    return _assemble(families)


__all__ = [
    "FAMILY_COUNTS",
    "TOTAL_FEATURES",
    "FeatureVector",
    "TextureMatrices",
    "extract_instance",
    "feature_names",
    "features_from_roi",
    "validate_census",
]

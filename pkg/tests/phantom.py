"""Synthetic MR cohort builder for end-to-end tests.

Generates a cohort of patients with ellipsoidal tumors embedded in noisy
volumes: one class is dim and homogeneous, the other bright and strongly
textured, so intensity statistics separate them. All files go through the
package's own NIfTI and manifest writers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from fibromics.manifest import CaseRecord, Manifest, write_manifest
from fibromics.nifti import LabelGrid, VoxelGrid, write_label_nifti, write_nifti

SHAPE = (36, 36, 14)
SPACING = (1.5, 1.5, 5.0)


@dataclass(frozen=True)
class PhantomCohort:
    root: str
    manifest_path: str
    n_patients: int
    n_images: int
    n_instances: int


def _ellipsoid(center, radii) -> np.ndarray:
    idx = np.indices(SHAPE, dtype=np.float64)
    acc = np.zeros(SHAPE, dtype=np.float64)
    for a in range(3):
        acc += ((idx[a] - center[a]) / radii[a]) ** 2
    return acc <= 1.0


def _paint(volume: np.ndarray, region: np.ndarray, cls: str, rng) -> None:
    n = int(region.sum())
    if cls == "LMS":
        volume[region] = 170.0 + rng.normal(0.0, 40.0, size=n)
    else:
        ramp = np.indices(SHAPE, dtype=np.float64)[0] * 0.4
        volume[region] = 60.0 + ramp[region] + rng.normal(0.0, 3.0, size=n)


def _case_volume(cls: str, second_instance: bool, rng):
    """One image: (float volume, tumor LabelGrid, uterus LabelGrid)."""
    volume = rng.normal(100.0, 10.0, size=SHAPE)
    labels = np.zeros(SHAPE, dtype=np.uint16)

    center = rng.uniform((12, 12, 5), (24, 24, 9))
    radii = rng.uniform((4.5, 4.5, 2.2), (8.0, 8.0, 4.0))
    first = _ellipsoid(center, radii)
    _paint(volume, first, cls, rng)
    labels[first] = 1

    if second_instance:
        offset = -9.0 if center[0] + center[1] > 36.0 else 9.0
        c2 = (center[0] + offset, center[1] + offset, center[2])
        second = _ellipsoid(c2, (3.0, 3.0, 1.6)) & ~first
        if second.sum() >= 8:
            _paint(volume, second, cls, rng)
            labels[second] = 2

    uterus = ndimage.binary_dilation(labels > 0, iterations=2) & (labels == 0)
    return (
        VoxelGrid(volume, SPACING),
        LabelGrid(labels, SPACING),
        LabelGrid(uterus.astype(np.uint16), SPACING),
    )


def build_phantom(root: str, n_patients: int = 60, seed: int = 0) -> PhantomCohort:
    rng = np.random.default_rng(seed)
    images_dir = os.path.join(root, "images")
    masks_dir = os.path.join(root, "masks")
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)

    cases = []
    n_images = 0
    n_instances = 0
    for p in range(n_patients):
        pid = f"P{p:03d}"
        cls = "LMS" if p % 3 == 0 else "DLM"
        image_count = 2 if p % 5 == 4 else 1
        age = int(rng.integers(30, 80))
        menstrual = int(rng.integers(0, 3))
        for k in range(image_count):
            iid = f"I{p:03d}{k}"
            second = (p + k) % 7 == 3
            image, tumor, uterus = _case_volume(cls, second, rng)
            image_path = os.path.join(images_dir, f"{pid}_{iid}_img.nii.gz")
            tumor_path = os.path.join(masks_dir, f"{pid}_{iid}_tumor.nii.gz")
            uterus_path = os.path.join(masks_dir, f"{pid}_{iid}_uterus.nii.gz")
            write_nifti(image_path, image)
            write_label_nifti(tumor_path, tumor)
            write_label_nifti(uterus_path, uterus)
            instance_classes = {int(lab): cls for lab in tumor.labels()}
            cases.append(
                CaseRecord(
                    patient_id=pid,
                    image_id=iid,
                    image_path=image_path,
                    tumor_mask_path=tumor_path,
                    uterus_mask_path=uterus_path,
                    instance_classes=instance_classes,
                    age_years=age,
                    menstrual_status=menstrual,
                    adenomyosis=int(rng.integers(1, 6)),
                    fat_saturated=int(rng.integers(0, 2)),
                )
            )
            n_images += 1
            n_instances += len(instance_classes)

    manifest_path = os.path.join(root, "manifest.csv")
    write_manifest(manifest_path, Manifest(cases))
    return PhantomCohort(root, manifest_path, n_patients, n_images, n_instances)


def perturb_masks(cohort: PhantomCohort, out_dir: str, seed: int = 1) -> str:
    """Write a slightly eroded/dilated copy of every tumor and uterus mask,
    standing in for a second reader or an automatic segmentation."""
    from fibromics.manifest import load_manifest
    from fibromics.nifti import read_label_nifti

    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    manifest = load_manifest(cohort.manifest_path)
    for case in manifest.cases:
        tumor = read_label_nifti(case.tumor_mask_path)
        out = np.zeros(tumor.shape, dtype=np.uint16)
        for label in tumor.labels():
            binary = tumor.data == label
            if rng.random() < 0.5:
                moved = ndimage.binary_erosion(binary)
                if not moved.any():
                    moved = binary
            else:
                moved = ndimage.binary_dilation(binary)
            out[moved & (out == 0)] = label
        write_label_nifti(
            os.path.join(out_dir, f"{case.patient_id}_{case.image_id}_tumor.nii.gz"),
            LabelGrid(out, tumor.spacing, tumor.origin),
        )
        uterus = read_label_nifti(case.uterus_mask_path)
        moved = ndimage.binary_dilation(uterus.data > 0)
        write_label_nifti(
            os.path.join(out_dir, f"{case.patient_id}_{case.image_id}_uterus.nii.gz"),
            LabelGrid(moved.astype(np.uint16), uterus.spacing, uterus.origin),
        )
    return out_dir

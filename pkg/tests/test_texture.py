import numpy as np
import pytest

from fibromics.features.matrices import compute_matrices
from fibromics.features.texture import (
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
    ngtdm_features,
)
from fibromics.nifti import LabelGrid, VoxelGrid
from fibromics.preprocess import discretize


def _roi_from_levels(levels3d, width=25.0):
    lv = np.asarray(levels3d, dtype=np.int32)
    img = VoxelGrid((lv.astype(float) - 1.0) * width, (1.0, 1.0, 1.0))
    mask = LabelGrid((lv > 0).astype(np.int32), (1.0, 1.0, 1.0))
    return discretize(img, mask, 1, width)


def _mats(levels3d):
    return compute_matrices(_roi_from_levels(levels3d))


def _counts(levels3d):
    lv = np.asarray(levels3d, dtype=np.int64)
    return np.bincount(lv[lv > 0])[1:]


def test_family_sizes():
    lv = np.arange(1, 9).reshape(2, 2, 2)
    tm = _mats(lv)
    assert len(glcm_features(tm, _counts(lv))) == 24
    assert len(glrlm_features(tm)) == 16
    assert len(glszm_features(tm)) == 16
    assert len(gldm_features(tm)) == 14
    assert len(ngtdm_features(tm)) == 5


def test_single_level_conventions():
    lv = np.ones((3, 3, 3), dtype=np.int32)
    tm = _mats(lv)
    g = glcm_features(tm, _counts(lv))
    assert g["Contrast"] == 0.0
    assert g["Correlation"] == 1.0
    assert g["Imc1"] == 0.0
    assert g["Imc2"] == 0.0
    assert g["MCC"] == 1.0
    assert g["JointEnergy"] == 1.0
    assert g["MaximumProbability"] == 1.0
    assert g["JointEntropy"] == 0.0
    r = glrlm_features(tm)
    assert r["GrayLevelNonUniformityNormalized"] == 1.0
    assert r["GrayLevelVariance"] == 0.0
    n = ngtdm_features(tm)
    assert n["Busyness"] == 0.0
    assert n["Contrast"] == 0.0
    d = gldm_features(tm)
    assert d["GrayLevelVariance"] == 0.0
    assert d["LowGrayLevelEmphasis"] == 1.0


def test_single_voxel_diagonal_fallback():
    # no direction has a pair: features fall back to the gray-level
    # distribution on the diagonal and stay finite
    lv = np.zeros((3, 3, 3), dtype=np.int32)
    lv[1, 1, 1] = 1
    tm = _mats(lv)
    g = glcm_features(tm, np.array([1]))
    assert g["Contrast"] == 0.0
    assert g["Correlation"] == 1.0
    assert g["MaximumProbability"] == 1.0
    assert all(np.isfinite(v) for v in g.values())


def test_checkerboard_mean_contrast():
    # axis-parity argument: 7 of the 13 direction offsets flip the color
    # of a 3D checkerboard, the other 6 preserve it
    idx = np.indices((4, 4, 4)).sum(axis=0)
    lv = (idx % 2 + 1).astype(np.int32)
    tm = _mats(lv)
    g = glcm_features(tm, _counts(lv))
    assert g["Contrast"] == pytest.approx(7.0 / 13.0, abs=1e-12)


def test_glcm_strip_hand_values():
    lv = np.zeros((1, 1, 3), dtype=np.int32)
    lv[0, 0] = [1, 2, 3]
    tm = _mats(lv)
    g = glcm_features(tm, _counts(lv))
    # single populated direction; joint distribution is 4 cells of 1/4
    assert g["JointEntropy"] == pytest.approx(2.0)
    assert g["JointEnergy"] == pytest.approx(0.25)
    assert g["MaximumProbability"] == pytest.approx(0.25)
    assert g["Contrast"] == pytest.approx(1.0)
    assert g["Correlation"] == pytest.approx(0.0)
    assert g["Autocorrelation"] == pytest.approx(4.0)
    assert g["JointAverage"] == pytest.approx(2.0)
    assert g["SumAverage"] == pytest.approx(4.0)
    assert g["SumEntropy"] == pytest.approx(1.0)
    assert g["DifferenceAverage"] == pytest.approx(1.0)
    assert g["DifferenceEntropy"] == pytest.approx(0.0)
    assert g["DifferenceVariance"] == pytest.approx(0.0)
    assert g["Id"] == pytest.approx(0.5)
    assert g["Idm"] == pytest.approx(0.5)
    assert g["Idmn"] == pytest.approx(0.9)
    assert g["Idn"] == pytest.approx(0.75)
    assert g["InverseVariance"] == pytest.approx(1.0)


def test_glcm_probabilities_normalized():
    rng = np.random.default_rng(0)
    lv = rng.integers(1, 5, size=(4, 4, 3)).astype(np.int32)
    tm = _mats(lv)
    for mat in tm.glcm:
        if mat.sum() > 0:
            p = mat / mat.sum()
            assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_glrlm_direction_mean():
    lv = np.zeros((1, 1, 3), dtype=np.int32)
    lv[0, 0] = [1, 1, 2]
    r = glrlm_features(_mats(lv))
    # along the strip: one run of length 2 and one of length 1;
    # the other 12 directions each see three singleton runs
    along_sre = (1.0 / 4.0 + 1.0) / 2.0
    assert r["ShortRunEmphasis"] == pytest.approx((along_sre + 12.0) / 13.0)
    assert r["RunPercentage"] == pytest.approx((2.0 / 3.0 + 12.0) / 13.0)


def test_glszm_hand_values():
    lv = np.zeros((1, 1, 3), dtype=np.int32)
    lv[0, 0] = [1, 1, 2]
    z = glszm_features(_mats(lv))
    assert z["SmallAreaEmphasis"] == pytest.approx(5.0 / 8.0)
    assert z["LargeAreaEmphasis"] == pytest.approx(2.5)
    assert z["ZonePercentage"] == pytest.approx(2.0 / 3.0)
    assert z["GrayLevelVariance"] == pytest.approx(0.25)
    assert z["ZoneVariance"] == pytest.approx(0.25)
    assert z["ZoneEntropy"] == pytest.approx(1.0)
    assert z["HighGrayLevelZoneEmphasis"] == pytest.approx(2.5)
    assert z["LowGrayLevelZoneEmphasis"] == pytest.approx(0.625)


def test_gldm_hand_values():
    lv = np.zeros((1, 1, 3), dtype=np.int32)
    lv[0, 0] = [1, 1, 2]
    d = gldm_features(_mats(lv))
    assert d["SmallDependenceEmphasis"] == pytest.approx(0.5)
    assert d["LargeDependenceEmphasis"] == pytest.approx(3.0)
    assert d["HighGrayLevelEmphasis"] == pytest.approx(2.0)
    assert d["LowGrayLevelEmphasis"] == pytest.approx(0.75)
    assert d["DependenceNonUniformity"] == pytest.approx(5.0 / 3.0)
    assert d["DependenceNonUniformityNormalized"] == pytest.approx(5.0 / 9.0)
    assert d["GrayLevelNonUniformity"] == pytest.approx(5.0 / 3.0)
    assert d["GrayLevelVariance"] == pytest.approx(2.0 / 9.0)
    assert d["DependenceVariance"] == pytest.approx(2.0 / 9.0)
    assert d["DependenceEntropy"] == pytest.approx(0.9182958340544896)


def test_ngtdm_hand_values():
    lv = np.zeros((1, 1, 3), dtype=np.int32)
    lv[0, 0] = [1, 1, 2]
    n = ngtdm_features(_mats(lv))
    assert n["Coarseness"] == pytest.approx(1.5)
    assert n["Contrast"] == pytest.approx(1.0 / 9.0)
    # level tones balance exactly here, so the busyness denominator vanishes
    assert n["Busyness"] == 0.0
    assert n["Complexity"] == pytest.approx(4.0 / 9.0)
    assert n["Strength"] == pytest.approx(4.0 / 3.0)


def test_all_features_finite_on_random_rois():
    rng = np.random.default_rng(1)
    for _ in range(20):
        dims = tuple(int(v) for v in rng.integers(1, 6, size=3))
        lv = rng.integers(0, 5, size=dims).astype(np.int32)
        if not (lv > 0).any():
            lv.flat[0] = 1
        lv_pos = lv[lv > 0]
        tm = compute_matrices(_roi_from_levels(lv))
        counts = np.bincount(lv_pos, minlength=int(lv_pos.max()) + 1)[1:]
        for family in (
            glcm_features(tm, counts),
            glrlm_features(tm),
            glszm_features(tm),
            gldm_features(tm),
            ngtdm_features(tm),
        ):
            for name, v in family.items():
                assert np.isfinite(v), name

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibromics.errors import FitError
from fibromics.manifest import CaseRecord
from fibromics.stats import (
    compare_covariates,
    mann_whitney_u,
    mutual_information,
    mutual_information_pair,
    zscore_apply,
    zscore_fit,
)
from oracles import mwu_exact_enumeration


def _record(age, menstrual=1, adeno=2, fat=0):
    return CaseRecord(
        patient_id=f"P{age}",
        image_id="I0",
        image_path="x.nii",
        tumor_mask_path="t.nii",
        uterus_mask_path=None,
        instance_classes={1: "DLM"},
        age_years=age,
        menstrual_status=menstrual,
        adenomyosis=adeno,
        fat_saturated=fat,
    )


def test_mwu_tiny_example():
    res = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
    assert res.u == 0.0
    assert res.exact
    # 6 equally likely rank assignments, 2 reach U = 0
    assert res.p_value == pytest.approx(1.0 / 3.0)


def test_mwu_identical_samples():
    res = mann_whitney_u([1.0, 2.0, 3.0, 7.0], [1.0, 2.0, 3.0, 7.0])
    assert res.p_value >= 0.99


def test_mwu_separated_large_samples():
    x = np.arange(50, dtype=float)
    y = np.arange(100, 150, dtype=float)
    res = mann_whitney_u(x, y)
    assert not res.exact  # n + m > exact enumeration limit
    assert res.u == 0.0
    assert res.p_value < 1e-10


def test_mwu_monotone_transform_invariance():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 1, size=12)
    y = rng.normal(0.5, 1, size=9)
    base = mann_whitney_u(x, y)
    warped = mann_whitney_u(np.exp(x), np.exp(y))
    assert warped.u == base.u
    assert warped.p_value == pytest.approx(base.p_value, abs=1e-12)


def test_mwu_matches_enumeration_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 11 - n))
        vals = rng.permutation(np.arange(20, dtype=float))
        x, y = vals[:n], vals[n : n + m]
        res = mann_whitney_u(x, y)
        u_slow, p_slow = mwu_exact_enumeration(x, y)
        assert res.exact
        assert res.u == pytest.approx(u_slow)
        assert res.p_value == pytest.approx(p_slow, abs=1e-12)


def test_mwu_empty_sample_rejected():
    with pytest.raises(FitError):
        mann_whitney_u([], [1.0])


def test_mwu_ties_use_normal_approximation():
    res = mann_whitney_u([1.0, 1.0, 2.0], [1.0, 2.0, 2.0])
    assert not res.exact
    assert 0.0 < res.p_value <= 1.0


def test_zscore_basic():
    norm = zscore_fit(np.array([[1.0], [2.0], [3.0]]), ("f",))
    assert norm.means[0] == 2.0
    assert norm.sds[0] == 1.0
    out = zscore_apply(norm, np.array([[1.0], [2.0], [3.0]]))
    assert out.ravel() == pytest.approx([-1.0, 0.0, 1.0])
    assert out.mean() == pytest.approx(0.0)
    assert out.std(ddof=1) == pytest.approx(1.0)


def test_zscore_constant_feature_maps_to_zero():
    m = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    norm = zscore_fit(m, ("const", "varies"))
    assert norm.constant.tolist() == [True, False]
    out = zscore_apply(norm, np.array([[99.0, 2.0]]))
    assert out[0, 0] == 0.0
    assert out[0, 1] == 0.0


def test_zscore_train_statistics_only():
    train = np.array([[0.0], [10.0]])
    norm = zscore_fit(train, ("f",))
    out = zscore_apply(norm, np.array([[20.0]]))
    # test rows scale by train mean 5 and sd sqrt(50)
    assert out[0, 0] == pytest.approx((20.0 - 5.0) / np.sqrt(50.0))


def test_zscore_shape_errors():
    norm = zscore_fit(np.zeros((2, 3)), ("a", "b", "c"))
    with pytest.raises(FitError):
        zscore_apply(norm, np.zeros((2, 2)))
    with pytest.raises(FitError):
        zscore_fit(np.zeros((0, 3)), ("a", "b", "c"))


def test_mutual_information_balanced_split():
    # feature separates labels perfectly: MI equals label entropy ln 2
    values = np.array([0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0])
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    assert mutual_information(values, labels) == pytest.approx(np.log(2.0), abs=1e-9)


def test_mutual_information_constant_feature():
    assert mutual_information(np.ones(10), np.r_[np.zeros(5), np.ones(5)]) == 0.0


def test_mutual_information_one_flip():
    # 8 samples, binary feature, one label flipped: plug-in MI by hand
    values = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0])
    labels = np.array([0, 0, 0, 1, 1, 1, 1, 1])
    joint = np.array([[3 / 8, 1 / 8], [0.0, 4 / 8]])
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    expected = float((joint[nz] * np.log(joint[nz] / (px @ py)[nz])).sum())
    assert mutual_information(values, labels) == pytest.approx(expected, abs=1e-12)


def test_mutual_information_pair_self():
    rng = np.random.default_rng(2)
    x = rng.normal(0, 1, size=200)
    self_mi = mutual_information_pair(x, x)
    other_mi = mutual_information_pair(x, rng.normal(0, 1, size=200))
    assert self_mi > other_mi
    assert self_mi == pytest.approx(np.log(10.0), rel=0.01)


def test_mutual_information_validation():
    with pytest.raises(FitError):
        mutual_information([1.0], [])
    with pytest.raises(FitError):
        mutual_information_pair([], [])


def test_compare_covariates_balanced():
    a = [_record(40 + i) for i in range(10)]
    b = [_record(40 + i) for i in range(10)]
    results = compare_covariates(a, b)
    names = [r.covariate for r in results]
    assert names == ["age_years", "menstrual_status", "adenomyosis", "fat_saturated"]
    assert results[0].test == "mann_whitney"
    assert all(r.p_value > 0.9 for r in results)


def test_compare_covariates_fisher_on_sparse_2x2():
    # perfectly separated fat saturation with tiny counts: Fisher exact
    a = [_record(50, fat=0) for _ in range(9)]
    b = [_record(50, fat=1) for _ in range(10)]
    results = compare_covariates(a, b)
    fat = next(r for r in results if r.covariate == "fat_saturated")
    assert fat.test == "fisher_exact"
    # [[9,0],[0,10]]: the observed table is the unique most extreme one
    assert fat.p_value == pytest.approx(1.0 / 92378.0, rel=1e-9)


def test_compare_covariates_chi_square_path():
    a = [_record(50, menstrual=i % 3) for i in range(30)]
    b = [_record(50, menstrual=(i + 1) % 3) for i in range(30)]
    results = compare_covariates(a, b)
    men = next(r for r in results if r.covariate == "menstrual_status")
    assert men.test == "chi_square"
    assert men.p_value == pytest.approx(1.0, abs=1e-6)


def test_compare_covariates_empty_rejected():
    with pytest.raises(FitError):
        compare_covariates([], [_record(50)])


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_mwu_p_value_bounds(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 1, size=int(rng.integers(1, 20)))
    y = rng.normal(0, 1, size=int(rng.integers(1, 20)))
    res = mann_whitney_u(x, y)
    assert 0.0 < res.p_value <= 1.0
    assert 0.0 <= res.u <= len(x) * len(y) / 2.0

import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibromics.errors import GeometryError, NiftiFormatError
from fibromics.nifti import (
    LabelGrid,
    VoxelGrid,
    merge_uterus_and_tumor,
    read_label_nifti,
    read_nifti,
    same_geometry,
    write_label_nifti,
    write_nifti,
)


def _random_grid(rng, max_dim=6):
    dims = tuple(int(d) for d in rng.integers(1, max_dim + 1, size=3))
    spacing = tuple(float(s) for s in rng.uniform(0.2, 5.0, size=3))
    origin = tuple(float(o) for o in rng.uniform(-8.0, 8.0, size=3))
    data = rng.normal(0, 100, size=dims).astype(np.float32).astype(np.float64)
    return VoxelGrid(data, spacing, origin)


def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    grid = _random_grid(rng)
    path = str(tmp_path / "vol.nii")
    write_nifti(path, grid)
    back = read_nifti(path)
    assert np.array_equal(back.data, grid.data)
    assert np.allclose(back.spacing, grid.spacing, atol=1e-6)
    assert np.allclose(back.origin, grid.origin, atol=1e-6)


def test_round_trip_gzip(tmp_path):
    rng = np.random.default_rng(1)
    grid = _random_grid(rng)
    path = str(tmp_path / "vol.nii.gz")
    write_nifti(path, grid)
    with open(path, "rb") as fh:
        assert fh.read(2) == b"\x1f\x8b"
    back = read_nifti(path)
    assert np.array_equal(back.data, grid.data)


def test_write_is_byte_deterministic(tmp_path):
    rng = np.random.default_rng(2)
    grid = _random_grid(rng)
    p1, p2 = str(tmp_path / "a.nii.gz"), str(tmp_path / "b.nii.gz")
    write_nifti(p1, grid)
    write_nifti(p2, grid)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_uncompressed_file_size(tmp_path):
    grid = VoxelGrid(np.zeros((2, 2, 2)), (1.0, 1.0, 1.0))
    path = str(tmp_path / "tiny.nii")
    write_nifti(path, grid)
    assert (tmp_path / "tiny.nii").stat().st_size == 352 + 8 * 4


def test_label_round_trip(tmp_path):
    labels = np.array([[[0, 1], [2, 3]], [[4, 0], [1, 9]]], dtype=np.uint16)
    grid = LabelGrid(labels, (0.7, 0.8, 2.0), (1.0, -2.0, 3.0))
    path = str(tmp_path / "lab.nii.gz")
    write_label_nifti(path, grid)
    back = read_label_nifti(path)
    assert np.array_equal(back.data, labels)
    assert back.labels() == [1, 2, 3, 4, 9]


def test_scl_scaling_applied(tmp_path):
    # int16 payload with slope 2, intercept 1: raw 3 must read as 7.
    grid = VoxelGrid(np.full((1, 1, 1), 3.0), (1.0, 1.0, 1.0))
    path = str(tmp_path / "scaled.nii")
    write_nifti(path, grid)
    raw = bytearray(open(path, "rb").read())
    struct.pack_into("<h", raw, 70, 4)  # datatype int16
    struct.pack_into("<h", raw, 72, 16)  # bitpix
    struct.pack_into("<f", raw, 112, 2.0)  # scl_slope
    struct.pack_into("<f", raw, 116, 1.0)  # scl_inter
    struct.pack_into("<h", raw, 352, 3)
    open(path, "wb").write(raw[:354])
    back = read_nifti(path)
    assert back.data[0, 0, 0] == 7.0


def test_detached_header_magic_rejected(tmp_path):
    grid = VoxelGrid(np.zeros((1, 1, 1)), (1.0, 1.0, 1.0))
    path = str(tmp_path / "bad.nii")
    write_nifti(path, grid)
    raw = bytearray(open(path, "rb").read())
    raw[344:348] = b"ni1\x00"
    open(path, "wb").write(raw)
    with pytest.raises(NiftiFormatError):
        read_nifti(path)


def test_truncated_payload_rejected(tmp_path):
    grid = VoxelGrid(np.zeros((3, 3, 3)), (1.0, 1.0, 1.0))
    path = str(tmp_path / "short.nii")
    write_nifti(path, grid)
    raw = open(path, "rb").read()
    open(path, "wb").write(raw[:-8])
    with pytest.raises(NiftiFormatError):
        read_nifti(path)


def test_labels_reject_scaling(tmp_path):
    grid = LabelGrid(np.ones((1, 1, 1), dtype=np.uint16), (1.0, 1.0, 1.0))
    path = str(tmp_path / "lab.nii")
    write_label_nifti(path, grid)
    raw = bytearray(open(path, "rb").read())
    struct.pack_into("<f", raw, 112, 2.0)
    open(path, "wb").write(raw)
    with pytest.raises(NiftiFormatError):
        read_label_nifti(path)


def test_merge_rules():
    spacing = (1.0, 1.0, 1.0)
    uterus = LabelGrid(np.ones((2, 2, 1), dtype=np.uint16), spacing)
    tumors = LabelGrid(np.zeros((2, 2, 1), dtype=np.uint16), spacing)
    merged = merge_uterus_and_tumor(uterus, tumors)
    assert set(np.unique(merged.data)) == {1}

    t = np.zeros((2, 2, 1), dtype=np.uint16)
    t[0, 0, 0] = 5
    merged = merge_uterus_and_tumor(uterus, LabelGrid(t, spacing))
    assert merged.data[0, 0, 0] == 2  # tumor wins inside the uterus
    assert merged.data[1, 1, 0] == 1

    u = np.zeros((2, 2, 1), dtype=np.uint16)
    u[1, 1, 0] = 1
    merged = merge_uterus_and_tumor(LabelGrid(u, spacing), LabelGrid(t, spacing))
    assert merged.data[0, 0, 0] == 2  # tumor outside the uterus still 2
    assert set(np.unique(merged.data)) <= {0, 1, 2}


def test_merge_geometry_mismatch():
    a = LabelGrid(np.zeros((2, 2, 2), dtype=np.uint16), (1.0, 1.0, 1.0))
    b = LabelGrid(np.zeros((2, 2, 2), dtype=np.uint16), (2.0, 1.0, 1.0))
    with pytest.raises(GeometryError):
        merge_uterus_and_tumor(a, b)


def test_same_geometry_tolerance():
    a = VoxelGrid(np.zeros((2, 2, 2)), (1.0, 1.0, 1.0))
    b = VoxelGrid(np.zeros((2, 2, 2)), (1.0, 1.0, 1.0005))
    c = VoxelGrid(np.zeros((2, 2, 2)), (1.0, 1.0, 1.5))
    assert same_geometry(a, b)
    assert not same_geometry(a, c)


def test_gzip_not_required_for_gz_free_path(tmp_path):
    # A gzip payload under a .nii name still loads: sniffed by magic.
    grid = VoxelGrid(np.ones((2, 2, 2)), (1.0, 1.0, 1.0))
    gz_path = str(tmp_path / "x.nii.gz")
    write_nifti(gz_path, grid)
    plain_name = str(tmp_path / "renamed.nii")
    open(plain_name, "wb").write(open(gz_path, "rb").read())
    assert np.array_equal(read_nifti(plain_name).data, grid.data)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_property(seed):
    import io
    import os
    import tempfile

    rng = np.random.default_rng(seed)
    grid = _random_grid(rng, max_dim=5)
    fd, path = tempfile.mkstemp(suffix=".nii.gz" if seed % 2 else ".nii")
    os.close(fd)
    try:
        write_nifti(path, grid)
        back = read_nifti(path)
        assert np.array_equal(back.data, grid.data)
        assert np.allclose(back.spacing, grid.spacing, atol=1e-6)
        assert np.allclose(back.origin, grid.origin, atol=1e-6)
    finally:
        os.unlink(path)


def test_label_values_over_16bit_rejected(tmp_path):
    grid = LabelGrid(np.full((1, 1, 1), 70000, dtype=np.int64), (1.0, 1.0, 1.0))
    with pytest.raises(NiftiFormatError):
        write_label_nifti(str(tmp_path / "big.nii"), grid)

"""Minimal NIfTI-1 reader/writer for axis-aligned single-frame volumes.

Covers exactly what the pipeline needs: 3D little-endian NIfTI-1 files
(.nii or .nii.gz), scalar images and small-integer label masks. Images
are written as float32, labels as uint16. Only axis-aligned orientation
matrices (permutation and flips) are accepted; oblique rotations are
rejected rather than silently mishandled. The qform is consulted only
when sform_code == 0.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, NiftiFormatError

HEADER_SIZE = 348
VOX_OFFSET = 352.0
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# NIfTI datatype code -> numpy dtype (little-endian), for the types we accept.
_DTYPES = {
    2: np.dtype("<u1"),
    4: np.dtype("<i2"),
    8: np.dtype("<i4"),
    16: np.dtype("<f4"),
    64: np.dtype("<f8"),
    256: np.dtype("<i1"),
    512: np.dtype("<u2"),
    768: np.dtype("<u4"),
}
_DT_FLOAT32 = 16
_DT_UINT16 = 512

# (name, struct format) pairs for the full 348-byte header, in file order.
_HEADER_FIELDS = (
    ("sizeof_hdr", "i"),
    ("data_type", "10s"),
    ("db_name", "18s"),
    ("extents", "i"),
    ("session_error", "h"),
    ("regular", "c"),
    ("dim_info", "c"),
    ("dim", "8h"),
    ("intent_p1", "f"),
    ("intent_p2", "f"),
    ("intent_p3", "f"),
    ("intent_code", "h"),
    ("datatype", "h"),
    ("bitpix", "h"),
    ("slice_start", "h"),
    ("pixdim", "8f"),
    ("vox_offset", "f"),
    ("scl_slope", "f"),
    ("scl_inter", "f"),
    ("slice_end", "h"),
    ("slice_code", "c"),
    ("xyzt_units", "c"),
    ("cal_max", "f"),
    ("cal_min", "f"),
    ("slice_duration", "f"),
    ("toffset", "f"),
    ("glmax", "i"),
    ("glmin", "i"),
    ("descrip", "80s"),
    ("aux_file", "24s"),
    ("qform_code", "h"),
    ("sform_code", "h"),
    ("quatern_b", "f"),
    ("quatern_c", "f"),
    ("quatern_d", "f"),
    ("qoffset_x", "f"),
    ("qoffset_y", "f"),
    ("qoffset_z", "f"),
    ("srow_x", "4f"),
    ("srow_y", "4f"),
    ("srow_z", "4f"),
    ("intent_name", "16s"),
    ("magic", "4s"),
)
_HEADER_STRUCT = struct.Struct("<" + "".join(fmt for _, fmt in _HEADER_FIELDS))
assert _HEADER_STRUCT.size == HEADER_SIZE


@dataclass(frozen=True)
class VoxelGrid:
    """A 3D scalar volume with voxel spacing and world origin in mm.

    data is indexed [x, y, z]; voxel center i maps to world coordinate
    origin + i * spacing along each axis.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise GeometryError(f"expected 3D data, got shape {self.data.shape}")
        if any(s <= 0 for s in self.spacing):
            raise GeometryError(f"spacing must be positive, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass(frozen=True)
class LabelGrid:
    """A 3D integer label volume; 0 is background, labels are instance ids."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise GeometryError(f"expected 3D data, got shape {self.data.shape}")
        if any(s <= 0 for s in self.spacing):
            raise GeometryError(f"spacing must be positive, got {self.spacing}")
        if not np.issubdtype(self.data.dtype, np.integer):
            raise GeometryError(f"label data must be integer, got {self.data.dtype}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def labels(self) -> list[int]:
        """Sorted nonzero labels present in the volume."""
        vals = np.unique(self.data)
        return [int(v) for v in vals if v != 0]

    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


def same_geometry(
    a: VoxelGrid | LabelGrid,
    b: VoxelGrid | LabelGrid,
    *,
    tol: float = 1e-3,
) -> bool:
    """True when two grids share shape, spacing, and origin within tol mm."""
    return (
        a.shape == b.shape
        and all(abs(x - y) <= tol for x, y in zip(a.spacing, b.spacing))
        and all(abs(x - y) <= tol for x, y in zip(a.origin, b.origin))
    )


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        rest = fh.read()
    raw = head + rest
    if head == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except OSError as exc:
            raise NiftiFormatError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def _parse_header(raw: bytes, path: str) -> dict:
    if len(raw) < HEADER_SIZE:
        raise NiftiFormatError(f"{path}: file shorter than the 348-byte header")
    values = _HEADER_STRUCT.unpack(raw[:HEADER_SIZE])
    hdr: dict = {}
    pos = 0
    for name, fmt in _HEADER_FIELDS:
        count = int(fmt[:-1]) if len(fmt) > 1 and fmt[-1] in "hfi" else 1
        if count > 1:
            hdr[name] = values[pos : pos + count]
            pos += count
        else:
            hdr[name] = values[pos]
            pos += 1
    return hdr


def _check_axis_aligned(rows: np.ndarray, path: str) -> tuple[float, float, float]:
    """Validate a 3x4 affine is permutation+flip only; return its translation."""
    mat = rows[:, :3]
    for r in range(3):
        nonzero = np.flatnonzero(np.abs(mat[r]) > 1e-5)
        if len(nonzero) > 1:
            raise NiftiFormatError(
                f"{path}: oblique orientation matrix is not supported "
                "(only axis-aligned permutations and flips)"
            )
    return (float(rows[0, 3]), float(rows[1, 3]), float(rows[2, 3]))


def _load(path: str) -> tuple[np.ndarray, tuple, tuple, dict]:
    raw = _read_bytes(path)
    hdr = _parse_header(raw, path)
    if hdr["sizeof_hdr"] != HEADER_SIZE:
        raise NiftiFormatError(
            f"{path}: sizeof_hdr is {hdr['sizeof_hdr']}, expected 348 "
            "(not a little-endian NIfTI-1 file)"
        )
    if hdr["magic"] == MAGIC_PAIR:
        raise NiftiFormatError(f"{path}: detached header/image pairs are not supported")
    if hdr["magic"] != MAGIC_SINGLE:
        raise NiftiFormatError(f"{path}: bad magic {hdr['magic']!r}, expected 'n+1'")
    ndim = hdr["dim"][0]
    if ndim != 3:
        raise NiftiFormatError(f"{path}: dim[0] is {ndim}, only 3D volumes are supported")
    code = hdr["datatype"]
    if code not in _DTYPES:
        raise NiftiFormatError(f"{path}: unsupported datatype code {code}")
    dims = tuple(int(d) for d in hdr["dim"][1:4])
    if any(d <= 0 for d in dims):
        raise NiftiFormatError(f"{path}: non-positive dimension in {dims}")
    dtype = _DTYPES[code]
    offset = int(hdr["vox_offset"])
    if offset < HEADER_SIZE:
        raise NiftiFormatError(f"{path}: vox_offset {offset} overlaps the header")
    n = dims[0] * dims[1] * dims[2]
    payload = raw[offset : offset + n * dtype.itemsize]
    if len(payload) < n * dtype.itemsize:
        raise NiftiFormatError(
            f"{path}: truncated payload, expected {n * dtype.itemsize} bytes "
            f"after offset {offset}, found {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype=dtype)
    # NIfTI stores x fastest; order="F" restores [x, y, z] indexing.
    data = flat.reshape(dims, order="F")

    spacing = tuple(float(abs(p)) for p in hdr["pixdim"][1:4])
    if any(s <= 0 for s in spacing):
        raise NiftiFormatError(f"{path}: non-positive pixdim in {hdr['pixdim'][1:4]}")

    if hdr["sform_code"] > 0:
        rows = np.array([hdr["srow_x"], hdr["srow_y"], hdr["srow_z"]], dtype=np.float64)
        origin = _check_axis_aligned(rows, path)
    elif hdr["qform_code"] > 0:
        b, c, d = hdr["quatern_b"], hdr["quatern_c"], hdr["quatern_d"]
        # Axis-aligned quaternions have at most one nonzero imaginary part
        # of magnitude 0 or 1 (identity, or a 180-degree flip about an axis).
        imag = [abs(v) for v in (b, c, d)]
        if sum(1 for v in imag if v > 1e-5) > 1 or any(1e-5 < v < 1 - 1e-5 for v in imag):
            raise NiftiFormatError(
                f"{path}: oblique qform rotation is not supported "
                "(only axis-aligned permutations and flips)"
            )
        origin = (float(hdr["qoffset_x"]), float(hdr["qoffset_y"]), float(hdr["qoffset_z"]))
    else:
        origin = (0.0, 0.0, 0.0)
    return data, spacing, origin, hdr


def read_nifti(path: str) -> VoxelGrid:
    """Read a scalar volume, applying scl_slope/scl_inter intensity scaling."""
    data, spacing, origin, hdr = _load(path)
    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    out = data.astype(np.float64)
    if slope != 0.0 and not np.isnan(slope) and (slope, inter) != (1.0, 0.0):
        out = out * slope + inter
    return VoxelGrid(np.ascontiguousarray(out), spacing, origin)


def read_label_nifti(path: str) -> LabelGrid:
    """Read an integer label mask; scaling headers on masks are rejected."""
    data, spacing, origin, hdr = _load(path)
    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    if slope not in (0.0, 1.0) or inter != 0.0:
        if not np.isnan(slope):
            raise NiftiFormatError(
                f"{path}: scl_slope/scl_inter scaling is not valid on a label mask"
            )
    if not np.issubdtype(data.dtype, np.integer):
        rounded = np.rint(data)
        if not np.array_equal(rounded, data):
            raise NiftiFormatError(f"{path}: label mask holds non-integer values")
        data = rounded
    if data.min() < 0:
        raise NiftiFormatError(f"{path}: label mask holds negative values")
    if data.max() > 65535:
        raise NiftiFormatError(f"{path}: label values exceed 65535")
    return LabelGrid(np.ascontiguousarray(data.astype(np.int32)), spacing, origin)


def _build_header(
    dims: tuple[int, int, int],
    spacing: tuple[float, float, float],
    origin: tuple[float, float, float],
    datatype: int,
    bitpix: int,
) -> bytes:
    values: list = []
    fields = {
        "sizeof_hdr": HEADER_SIZE,
        "data_type": b"",
        "db_name": b"",
        "extents": 0,
        "session_error": 0,
        "regular": b"r",
        "dim_info": b"\x00",
        "dim": (3, dims[0], dims[1], dims[2], 1, 1, 1, 1),
        "intent_p1": 0.0,
        "intent_p2": 0.0,
        "intent_p3": 0.0,
        "intent_code": 0,
        "datatype": datatype,
        "bitpix": bitpix,
        "slice_start": 0,
        "pixdim": (1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0),
        "vox_offset": VOX_OFFSET,
        "scl_slope": 1.0,
        "scl_inter": 0.0,
        "slice_end": 0,
        "slice_code": b"\x00",
        "xyzt_units": bytes([2]),  # millimetres
        "cal_max": 0.0,
        "cal_min": 0.0,
        "slice_duration": 0.0,
        "toffset": 0.0,
        "glmax": 0,
        "glmin": 0,
        "descrip": b"fibromics",
        "aux_file": b"",
        "qform_code": 0,
        "sform_code": 1,
        "quatern_b": 0.0,
        "quatern_c": 0.0,
        "quatern_d": 0.0,
        "qoffset_x": origin[0],
        "qoffset_y": origin[1],
        "qoffset_z": origin[2],
        "srow_x": (spacing[0], 0.0, 0.0, origin[0]),
        "srow_y": (0.0, spacing[1], 0.0, origin[1]),
        "srow_z": (0.0, 0.0, spacing[2], origin[2]),
        "intent_name": b"",
        "magic": MAGIC_SINGLE,
    }
    for name, _fmt in _HEADER_FIELDS:
        v = fields[name]
        if isinstance(v, tuple):
            values.extend(v)
        else:
            values.append(v)
    return _HEADER_STRUCT.pack(*values)


def _write_bytes(path: str, blob: bytes, compress: bool) -> None:
    if compress:
        # mtime and filename pinned so identical volumes produce identical files.
        with open(path, "wb") as fh:
            with gzip.GzipFile(fileobj=fh, mode="wb", filename="", mtime=0) as gz:
                gz.write(blob)
    else:
        with open(path, "wb") as fh:
            fh.write(blob)


def write_nifti(path: str, grid: VoxelGrid, *, compress: bool | None = None) -> None:
    """Write a scalar volume as float32. Compression follows the .gz suffix
    unless overridden."""
    if compress is None:
        compress = path.endswith(".gz")
    payload = np.asfortranarray(grid.data.astype(np.float32)).tobytes(order="F")
    hdr = _build_header(grid.shape, grid.spacing, grid.origin, _DT_FLOAT32, 32)
    blob = hdr + b"\x00" * (int(VOX_OFFSET) - HEADER_SIZE) + payload
    _write_bytes(path, blob, compress)


def write_label_nifti(path: str, grid: LabelGrid, *, compress: bool | None = None) -> None:
    """Write a label mask as uint16."""
    if compress is None:
        compress = path.endswith(".gz")
    if grid.data.min() < 0 or grid.data.max() > 65535:
        raise NiftiFormatError("label values outside uint16 range")
    payload = np.asfortranarray(grid.data.astype(np.uint16)).tobytes(order="F")
    hdr = _build_header(grid.shape, grid.spacing, grid.origin, _DT_UINT16, 16)
    blob = hdr + b"\x00" * (int(VOX_OFFSET) - HEADER_SIZE) + payload
    _write_bytes(path, blob, compress)


UTERUS_LABEL = 1
TUMOR_MERGE_LABEL = 2


def merge_uterus_and_tumor(uterus: LabelGrid, tumors: LabelGrid) -> LabelGrid:
    """Combine a uterus mask and a tumor instance mask into one 2-label mask.

    Output label 2 marks any tumor voxel (all instances collapsed); label 1
    marks uterus voxels not claimed by a tumor. Grids must share geometry.
    """
    if not same_geometry(uterus, tumors):
        raise GeometryError(
            f"uterus and tumor masks disagree: shapes {uterus.shape} vs {tumors.shape}, "
            f"spacings {uterus.spacing} vs {tumors.spacing}"
        )
    merged = np.zeros(uterus.shape, dtype=np.int32)
    merged[uterus.data > 0] = UTERUS_LABEL
    merged[tumors.data > 0] = TUMOR_MERGE_LABEL
    return LabelGrid(merged, uterus.spacing, uterus.origin)

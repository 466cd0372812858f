"""Shape features of a binary instance mask in physical (mm) coordinates.

Mesh area and volume come from an iso-0.5 triangulation built by marching
tetrahedra over a symmetric 24-tetrahedron split of each dual-grid cell
(cell center, face center, edge vertex pair). Unlike table-based marching
cubes, this split is exactly invariant under axis permutations and flips,
so mesh quantities are too. Diameters are measured on surface voxel
centers; axis lengths come from the eigenvalues of the voxel-center
covariance.
"""

from __future__ import annotations

import numpy as np

from ..errors import ExtractionError

# Corner c of a cell carries offset bit a in (c >> a) & 1 for axis a.
_CORNER_OFFSETS = np.array(
    [[(c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)], dtype=np.int64
)

# Each face: the 4 corners with bit `axis` equal to `side`, in cyclic order.
_FACES: list[list[int]] = []
for _axis in range(3):
    for _side in range(2):
        others = [a for a in range(3) if a != _axis]
        cyc = []
        for u, v in ((0, 0), (0, 1), (1, 1), (1, 0)):
            c = (_side << _axis) | (u << others[0]) | (v << others[1])
            cyc.append(c)
        _FACES.append(cyc)
_FACE_CORNERS = np.array(_FACES, dtype=np.int64)

# 24 tetrahedra: (face index, edge corner a, edge corner b).
_TETS = np.array(
    [(f, _FACES[f][e], _FACES[f][(e + 1) % 4]) for f in range(6) for e in range(4)],
    dtype=np.int64,
)

_ISO = 0.5


def _cut(p_a, v_a, p_b, v_b):
    """Iso-crossing point on segment a-b; one endpoint is inside, one outside."""
    t = ((_ISO - v_a) / (v_b - v_a))[:, None]
    return p_a + t * (p_b - p_a)


def _emit(tri_list, pos, vals, pattern):
    """Append oriented triangles for one inside/outside vertex pattern.

    pos: (n, 4, 3) tet vertex positions, vals: (n, 4) values, pattern gives
    (inside vertices, outside vertices) index tuples within the tet.
    """
    ins, outs = pattern
    ref = pos[:, ins, :].mean(axis=1)
    if len(ins) == 1:
        (i0,) = ins
        pts = [_cut(pos[:, i0], vals[:, i0], pos[:, j], vals[:, j]) for j in outs]
        tris = [np.stack(pts, axis=1)]
    elif len(ins) == 3:
        (j0,) = outs
        pts = [_cut(pos[:, i], vals[:, i], pos[:, j0], vals[:, j0]) for i in ins]
        tris = [np.stack(pts, axis=1)]
    else:
        i0, i1 = ins
        j0, j1 = outs
        a = _cut(pos[:, i0], vals[:, i0], pos[:, j0], vals[:, j0])
        b = _cut(pos[:, i0], vals[:, i0], pos[:, j1], vals[:, j1])
        c = _cut(pos[:, i1], vals[:, i1], pos[:, j1], vals[:, j1])
        d = _cut(pos[:, i1], vals[:, i1], pos[:, j0], vals[:, j0])
        tris = [np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)]
    for tri in tris:
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        centroid = tri.mean(axis=1)
        flip = np.einsum("ij,ij->i", n, centroid - ref) < 0
        tri[flip, 1], tri[flip, 2] = tri[flip, 2].copy(), tri[flip, 1].copy()
        tri_list.append(tri)


def mesh_surface(mask: np.ndarray, spacing: tuple[float, float, float]) -> tuple[float, float]:
    """Surface area (mm^2) and enclosed volume (mm^3) of the iso-0.5 mesh."""
    if not mask.any():
        raise ExtractionError("empty mask has no surface")
    vals = np.zeros(tuple(s + 2 for s in mask.shape), dtype=np.float64)
    vals[1:-1, 1:-1, 1:-1] = mask.astype(np.float64)

    # A cell needs triangles only when its 8 corners are mixed.
    corners = np.stack(
        [
            vals[dx : dx + vals.shape[0] - 1, dy : dy + vals.shape[1] - 1, dz : dz + vals.shape[2] - 1]
            for dx, dy, dz in _CORNER_OFFSETS
        ],
        axis=-1,
    )
    mixed = np.argwhere((corners.max(axis=-1) >= _ISO) & (corners.min(axis=-1) < _ISO))
    if len(mixed) == 0:
        raise ExtractionError("mask has no iso surface")
    cvals = corners[mixed[:, 0], mixed[:, 1], mixed[:, 2]]  # (m, 8)

    sp = np.asarray(spacing, dtype=np.float64)
    cpos = (mixed[:, None, :] + _CORNER_OFFSETS[None, :, :]) * sp  # (m, 8, 3)
    center_v = cvals.mean(axis=1)
    center_p = cpos.mean(axis=1)
    face_v = cvals[:, _FACE_CORNERS].mean(axis=2)  # (m, 6)
    face_p = cpos[:, _FACE_CORNERS, :].mean(axis=2)  # (m, 6, 3)

    m = len(mixed)
    tet_v = np.empty((m, 24, 4), dtype=np.float64)
    tet_p = np.empty((m, 24, 4, 3), dtype=np.float64)
    tet_v[:, :, 0] = center_v[:, None]
    tet_p[:, :, 0] = center_p[:, None, :]
    tet_v[:, :, 1] = face_v[:, _TETS[:, 0]]
    tet_p[:, :, 1] = face_p[:, _TETS[:, 0], :]
    tet_v[:, :, 2] = cvals[:, _TETS[:, 1]]
    tet_p[:, :, 2] = cpos[:, _TETS[:, 1], :]
    tet_v[:, :, 3] = cvals[:, _TETS[:, 2]]
    tet_p[:, :, 3] = cpos[:, _TETS[:, 2], :]
    tet_v = tet_v.reshape(-1, 4)
    tet_p = tet_p.reshape(-1, 4, 3)

    inside = tet_v >= _ISO
    count = inside.sum(axis=1)
    keep = (count > 0) & (count < 4)
    tet_v, tet_p, inside = tet_v[keep], tet_p[keep], inside[keep]
    code = inside @ np.array([1, 2, 4, 8])

    tris: list[np.ndarray] = []
    for c in range(1, 15):
        sel = code == c
        if not sel.any():
            continue
        ins = tuple(i for i in range(4) if c & (1 << i))
        outs = tuple(i for i in range(4) if not c & (1 << i))
        _emit(tris, tet_p[sel], tet_v[sel], (ins, outs))
    if not tris:
        raise ExtractionError("mask has no iso surface")
    tri = np.concatenate(tris, axis=0)
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    area = float(0.5 * np.linalg.norm(normals, axis=1).sum())
    volume = float(
        abs(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum()) / 6.0
    )
    return area, volume


def surface_voxels(mask: np.ndarray) -> np.ndarray:
    """Indices of ROI voxels with fewer than 6 in-ROI face neighbors."""
    padded = np.zeros(tuple(s + 2 for s in mask.shape), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = mask
    inner = padded[1:-1, 1:-1, 1:-1]
    full = np.ones_like(inner, dtype=bool)
    for axis in range(3):
        for step in (-1, 1):
            full &= np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
    return np.argwhere(inner & ~full)


def _max_pairwise_dist(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    best = 0.0
    chunk = 512
    for i in range(0, len(points), chunk):
        diff = points[i : i + chunk, None, :] - points[None, :, :]
        best = max(best, float((diff * diff).sum(axis=-1).max()))
    return float(np.sqrt(best))


def shape_features(mask: np.ndarray, spacing: tuple[float, float, float]) -> dict[str, float]:
    """All 14 shape features for one binary instance mask."""
    if mask.dtype != bool:
        mask = mask.astype(bool)
    n = int(mask.sum())
    if n == 0:
        raise ExtractionError("empty mask")
    sp = np.asarray(spacing, dtype=np.float64)
    voxvol = float(np.prod(sp))
    area, volume = mesh_surface(mask, spacing)

    coords = np.argwhere(mask).astype(np.float64) * sp
    surf_idx = surface_voxels(mask)
    phys = surf_idx.astype(np.float64) * sp
    max3d = _max_pairwise_dist(phys)

    # Planes are named by the axis they hold fixed: slice = z, column = y, row = x.
    def planar(fixed_axis: int) -> float:
        keep = [a for a in range(3) if a != fixed_axis]
        best = 0.0
        for v in np.unique(surf_idx[:, fixed_axis]):
            plane = phys[surf_idx[:, fixed_axis] == v][:, keep]
            best = max(best, _max_pairwise_dist(plane))
        return best

    if n >= 2:
        cov = np.cov(coords, rowvar=False, ddof=1)
        eig = np.linalg.eigvalsh(cov)
        eig = np.maximum(eig, 0.0)
        least, minor, major = (float(v) for v in eig)
    else:
        least = minor = major = 0.0
    if major > 0:
        elongation = float(np.sqrt(minor / major))
        flatness = float(np.sqrt(least / major))
    else:
        elongation = 1.0
        flatness = 1.0

    return {
        "MeshVolume": volume,
        "VoxelVolume": n * voxvol,
        "SurfaceArea": area,
        "SurfaceVolumeRatio": area / volume,
        "Sphericity": float((36.0 * np.pi * volume**2) ** (1.0 / 3.0) / area),
        "Maximum3DDiameter": max3d,
        "Maximum2DDiameterSlice": planar(2),
        "Maximum2DDiameterColumn": planar(1),
        "Maximum2DDiameterRow": planar(0),
        "MajorAxisLength": 4.0 * float(np.sqrt(major)),
        "MinorAxisLength": 4.0 * float(np.sqrt(minor)),
        "LeastAxisLength": 4.0 * float(np.sqrt(least)),
        "Elongation": elongation,
        "Flatness": flatness,
    }

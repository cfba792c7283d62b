"""Geometric primitives and the segment/triangle intersection predicate.

Coordinates are stored as little-endian float32 and every index-bearing array
uses :data:`INDEX_DTYPE`; mixing index widths across a boundary silently
corrupts lookups, so conversions go through :func:`as_index_array`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

REAL_DTYPE = np.dtype("<f4")
INDEX_DTYPE = np.dtype("<u4")

# |det| below these values is treated as a parallel segment
PARALLEL_EPS_32 = np.float32(1e-12)
PARALLEL_EPS_64 = np.float64(1e-15)


class InvalidGeometryError(ValueError):
    """Input arrays cannot describe a usable mesh or segment batch."""


def as_index_array(a) -> np.ndarray:
    """Convert ``a`` to the single index width used everywhere (uint32)."""
    arr = np.asarray(a)
    if arr.size and arr.dtype.kind in "iu":
        if arr.min() < 0 or arr.max() > np.iinfo(INDEX_DTYPE).max:
            raise InvalidGeometryError("index value does not fit in 32 bits")
    elif arr.size and arr.dtype.kind not in "iu":
        raise InvalidGeometryError(f"indices must be integers, got {arr.dtype}")
    return np.ascontiguousarray(arr, dtype=INDEX_DTYPE)


def _as_points(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=REAL_DTYPE)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidGeometryError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidGeometryError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh: ``vertices`` (N_v, 3) float32, ``triangles`` (N_t, 3) uint32."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        tris = as_index_array(self.triangles)
        if tris.ndim == 1 and tris.size == 0:
            tris = tris.reshape(0, 3)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise InvalidGeometryError(f"triangles must have shape (n, 3), got {tris.shape}")
        if tris.size and int(tris.max()) >= len(verts):
            raise InvalidGeometryError(
                f"triangle references vertex {int(tris.max())} but only {len(verts)} vertices exist"
            )
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (N_t, 3, 3)."""
        return self.vertices[self.triangles]


@dataclass(frozen=True)
class SegmentBatch:
    """Line segments ``starts[i] -> ends[i]``, both (N_r, 3) float32."""

    starts: np.ndarray
    ends: np.ndarray

    def __post_init__(self):
        s = _as_points(self.starts, "starts")
        e = _as_points(self.ends, "ends")
        if s.shape != e.shape:
            raise InvalidGeometryError(f"starts {s.shape} and ends {e.shape} differ in shape")
        object.__setattr__(self, "starts", s)
        object.__setattr__(self, "ends", e)

    def __len__(self) -> int:
        return len(self.starts)

    def __getitem__(self, i) -> "Segment":
        return Segment(self.starts[i], self.ends[i])

    def lengths(self) -> np.ndarray:
        d = self.ends.astype(np.float64) - self.starts
        return np.sqrt(np.einsum("ij,ij->i", d, d))


class Segment(NamedTuple):
    start: np.ndarray
    end: np.ndarray


class Aabb(NamedTuple):
    min: np.ndarray
    max: np.ndarray

    @classmethod
    def of_points(cls, pts) -> "Aabb":
        pts = np.asarray(pts, dtype=REAL_DTYPE).reshape(-1, 3)
        if len(pts) == 0:
            raise InvalidGeometryError("cannot bound an empty point set")
        return cls(pts.min(axis=0), pts.max(axis=0))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    def contains(self, other: "Aabb") -> bool:
        return bool(np.all(self.min <= other.min) and np.all(other.max <= self.max))

    def contains_point(self, p) -> bool:
        p = np.asarray(p, dtype=REAL_DTYPE)
        return bool(np.all(self.min <= p) and np.all(p <= self.max))


class Hit(NamedTuple):
    """Segment/triangle crossing.

    The crossing point is ``(1 - u - v) * v0 + u * v1 + v * v2`` and lies at
    parameter ``t`` along the segment.
    """

    t: float
    u: float
    v: float
    triangle_id: int = 0


@njit(cache=True)
def mt_core(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz, eps):
    """Moller-Trumbore on scalars; all arguments must share one float type.

    Returns ``(hit, t, u, v)``. Boundaries are inclusive (closed triangle,
    closed parameter interval).
    """
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    zero = det - det
    if abs(det) < eps:
        return False, zero, zero, zero
    sx = ox - ax
    sy = oy - ay
    sz = oz - az
    u = (sx * px + sy * py + sz * pz) / det
    if u < 0 or u > 1:
        return False, zero, zero, zero
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) / det
    if v < 0 or u + v > 1:
        return False, zero, zero, zero
    t = (e2x * qx + e2y * qy + e2z * qz) / det
    if t < 0 or t > 1:
        return False, zero, zero, zero
    # rounding can leave det above eps for a zero-area triangle; its normal is exactly zero
    nx = e1y * e2z - e1z * e2y
    ny = e1z * e2x - e1x * e2z
    nz = e1x * e2y - e1y * e2x
    if nx == 0 and ny == 0 and nz == 0:
        return False, zero, zero, zero
    return True, t, u, v


@njit(cache=True)
def segment_hits_triangle(vertices, triangles, tid, s, e, high_precision):
    """Test segment ``s -> e`` (float32 3-vectors) against triangle ``tid``.

    Returns ``(hit, t, u, v)`` with t/u/v rounded to float32.
    """
    i0 = triangles[tid, 0]
    i1 = triangles[tid, 1]
    i2 = triangles[tid, 2]
    if high_precision:
        ok, t, u, v = mt_core(
            np.float64(s[0]), np.float64(s[1]), np.float64(s[2]),
            np.float64(e[0]) - np.float64(s[0]),
            np.float64(e[1]) - np.float64(s[1]),
            np.float64(e[2]) - np.float64(s[2]),
            np.float64(vertices[i0, 0]), np.float64(vertices[i0, 1]), np.float64(vertices[i0, 2]),
            np.float64(vertices[i1, 0]), np.float64(vertices[i1, 1]), np.float64(vertices[i1, 2]),
            np.float64(vertices[i2, 0]), np.float64(vertices[i2, 1]), np.float64(vertices[i2, 2]),
            PARALLEL_EPS_64,
        )
        return ok, np.float32(t), np.float32(u), np.float32(v)
    return mt_core(
        s[0], s[1], s[2],
        e[0] - s[0], e[1] - s[1], e[2] - s[2],
        vertices[i0, 0], vertices[i0, 1], vertices[i0, 2],
        vertices[i1, 0], vertices[i1, 1], vertices[i1, 2],
        vertices[i2, 0], vertices[i2, 1], vertices[i2, 2],
        PARALLEL_EPS_32,
    )


def moller_trumbore(seg, v0, v1, v2, high_precision: bool = False) -> Hit | None:
    """Intersect one segment with one triangle; ``None`` when they do not cross.

    >>> h = moller_trumbore(((0.2, 0.2, -1), (0.2, 0.2, 1)), (0, 0, 0), (1, 0, 0), (0, 1, 0))
    >>> round(h.t, 6), round(h.u, 6), round(h.v, 6)
    (0.5, 0.2, 0.2)
    """
    start, end = seg
    verts = np.asarray([v0, v1, v2], dtype=REAL_DTYPE)
    if not np.all(np.isfinite(verts)):
        raise InvalidGeometryError("triangle vertices must be finite")
    s = _as_points(np.reshape(start, (1, 3)), "start")[0]
    e = _as_points(np.reshape(end, (1, 3)), "end")[0]
    tri = np.array([[0, 1, 2]], dtype=INDEX_DTYPE)
    ok, t, u, v = segment_hits_triangle(verts, tri, 0, s, e, bool(high_precision))
    if not ok:
        return None
    return Hit(float(t), float(u), float(v), 0)


def intersection_point(seg, hit: Hit) -> np.ndarray:
    """Point at parameter ``hit.t``; exact at both endpoints."""
    start = np.asarray(seg[0], dtype=np.float64)
    end = np.asarray(seg[1], dtype=np.float64)
    t = float(hit.t)
    return ((1.0 - t) * start + t * end).astype(REAL_DTYPE)


def intersection_distance(seg, hit: Hit) -> float:
    """Distance from the segment start to the crossing, ``t * |end - start|``."""
    d = np.asarray(seg[1], dtype=np.float64) - np.asarray(seg[0], dtype=np.float64)
    return float(hit.t) * float(np.sqrt(d @ d))


def segment_aabb(seg) -> Aabb:
    return Aabb.of_points([seg[0], seg[1]])


def segment_boxes(segments: SegmentBatch) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment bounding boxes as ``(mins, maxs)`` arrays of shape (N_r, 3)."""
    return np.minimum(segments.starts, segments.ends), np.maximum(segments.starts, segments.ends)


def triangle_aabb(mesh: Mesh, tid: int) -> Aabb:
    if not 0 <= tid < mesh.n_triangles:
        raise IndexError(f"triangle id {tid} out of range for {mesh.n_triangles} triangles")
    return Aabb.of_points(mesh.vertices[mesh.triangles[tid]])


def triangle_boxes(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    c = mesh.corners()
    return c.min(axis=1), c.max(axis=1)


def surface_extent(mesh: Mesh) -> Aabb:
    if mesh.n_vertices == 0:
        raise InvalidGeometryError("mesh has no vertices")
    return Aabb.of_points(mesh.vertices)


def aabb_overlap(a: Aabb, b: Aabb) -> bool:
    """Closed-interval overlap test: touching faces count."""
    return bool(np.all(a.min <= b.max) and np.all(b.min <= a.max))

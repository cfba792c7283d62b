"""Morton (Z-order) codes over triangle centroids.

Each axis is quantized to 21 bits and the three are interleaved into a 63-bit
code with z in the most significant slot of every triple, then y, then x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import INDEX_DTYPE, REAL_DTYPE, Aabb, Mesh, as_index_array

BITS_PER_AXIS = 21
COORD_MAX = (1 << BITS_PER_AXIS) - 1
MORTON_DTYPE = np.dtype("<u8")
COORD_DTYPE = np.dtype("<u4")

_MASKS = (
    (32, 0x1F00000000FFFF),
    (16, 0x1F0000FF0000FF),
    (8, 0x100F00F00F00F00F),
    (4, 0x10C30C30C30C30C3),
    (2, 0x1249249249249249),
)


def _check_coord(c) -> np.ndarray:
    arr = np.asarray(c)
    if arr.dtype.kind not in "iu":
        raise TypeError(f"quantized coordinates must be integers, got {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > COORD_MAX):
        raise ValueError(f"quantized coordinate outside [0, {COORD_MAX}]")
    return arr.astype(MORTON_DTYPE)


def expand_bits(c):
    """Move bit k of a 21-bit integer to bit 3k. Works on scalars and arrays."""
    x = _check_coord(c)
    for shift, mask in _MASKS:
        x = (x | (x << np.uint64(shift))) & np.uint64(mask)
    return int(x) if x.ndim == 0 else x


def compact_bits(x):
    """Inverse of :func:`expand_bits`: gather bits 3k back into bit k."""
    x = np.asarray(x, dtype=MORTON_DTYPE) & np.uint64(_MASKS[-1][1])
    # undo each spreading stage; the mask is the one the stage started from
    stage_inputs = [m for _, m in _MASKS[:-1]][::-1] + [COORD_MAX]
    for (shift, _), mask in zip(reversed(_MASKS), stage_inputs):
        x = (x | (x >> np.uint64(shift))) & np.uint64(mask)
    return int(x) if x.ndim == 0 else x


def morton_encode(q):
    """Interleave quantized ``(x, y, z)`` coordinates into a Morton code.

    ``q`` is a length-3 sequence or an (n, 3) array; z lands at bit 3k+2,
    y at 3k+1 and x at 3k.
    """
    arr = _check_coord(q)
    x, y, z = (expand_bits(arr[..., k]) for k in range(3))
    code = (np.asarray(z, MORTON_DTYPE) << np.uint64(2)) | (np.asarray(y, MORTON_DTYPE) << np.uint64(1)) | np.asarray(x, MORTON_DTYPE)
    return int(code) if code.ndim == 0 else code


def quantize_points(points, extent: Aabb) -> np.ndarray:
    """Map points affinely onto the 21-bit grid spanned by ``extent``.

    Scale-then-floor with clamping; axes of zero width map to 0.
    """
    p = np.asarray(points, dtype=np.float64)
    lo = np.asarray(extent.min, dtype=np.float64)
    width = np.asarray(extent.max, dtype=np.float64) - lo
    safe = np.where(width > 0, width, 1.0)
    scaled = np.floor((p - lo) / safe * COORD_MAX)
    scaled = np.where(width > 0, scaled, 0.0)
    return np.clip(scaled, 0, COORD_MAX).astype(COORD_DTYPE)


def quantize_point(p, extent: Aabb) -> tuple[int, int, int]:
    q = quantize_points(np.reshape(p, (1, 3)), extent)[0]
    return int(q[0]), int(q[1]), int(q[2])


def triangle_centroids(mesh: Mesh) -> np.ndarray:
    return mesh.corners().astype(np.float64).mean(axis=1).astype(REAL_DTYPE)


def triangle_centroid(mesh: Mesh, tid: int) -> np.ndarray:
    if not 0 <= tid < mesh.n_triangles:
        raise IndexError(f"triangle id {tid} out of range for {mesh.n_triangles} triangles")
    return mesh.vertices[mesh.triangles[tid]].astype(np.float64).mean(axis=0).astype(REAL_DTYPE)


@dataclass(frozen=True)
class SortedOrder:
    """Triangles in ascending Morton order.

    ``permutation[i]`` is the original id of the triangle in sorted slot i.
    """

    permutation: np.ndarray
    sorted_codes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "permutation", as_index_array(self.permutation))
        object.__setattr__(self, "sorted_codes", np.ascontiguousarray(self.sorted_codes, dtype=MORTON_DTYPE))
        if self.permutation.shape != self.sorted_codes.shape:
            raise ValueError("permutation and sorted_codes must have equal length")

    def __len__(self) -> int:
        return len(self.permutation)


def morton_codes(mesh: Mesh, extent: Aabb) -> np.ndarray:
    return morton_encode(quantize_points(triangle_centroids(mesh), extent))


def build_sorted_order(mesh: Mesh, extent: Aabb) -> SortedOrder:
    if mesh.n_triangles < 1:
        raise ValueError("at least one triangle is required")
    codes = np.atleast_1d(morton_codes(mesh, extent))
    perm = np.argsort(codes, kind="stable").astype(INDEX_DTYPE)
    return SortedOrder(perm, codes[perm])

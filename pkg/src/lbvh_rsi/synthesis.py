"""Deterministic synthetic scenes: undulating terrain plus short segments."""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, SegmentBatch

# 111 x 134 vertices -> 14,874 vertices and 29,260 triangles
PAPER_GRID = (111, 134)


def terrain(grid=PAPER_GRID, cell: float = 10.0, seed: int = 0, relief: float = 3.0,
            base: float = 60.0) -> Mesh:
    """Regular ``w x h`` vertex grid, two triangles per cell, smooth random heights.

    ``relief`` scales the height variation in units of ``cell``.
    """
    w, h = map(int, grid)
    if w < 2 or h < 2:
        raise ValueError(f"grid must be at least 2x2 vertices, got {w}x{h}")
    rng = np.random.default_rng(seed)
    xs = np.arange(w) * cell
    ys = np.arange(h) * cell
    X, Y = np.meshgrid(xs, ys)
    Z = np.full(X.shape, base)
    span = max(w, h) * cell
    for _ in range(4):
        kx, ky = rng.uniform(0.5, 3.0, 2) * 2 * np.pi / span
        amp = rng.uniform(0.3, 1.0) * relief * cell / 4
        Z += amp * np.sin(kx * X + rng.uniform(0, 2 * np.pi)) * np.cos(ky * Y + rng.uniform(0, 2 * np.pi))
    Z += rng.normal(0, 0.02 * cell, Z.shape)
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    i, j = np.meshgrid(np.arange(w - 1), np.arange(h - 1))
    v00 = (j * w + i).ravel()
    v10 = v00 + 1
    v01 = v00 + w
    v11 = v01 + 1
    tris = np.empty((2 * len(v00), 3), np.uint32)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])
    return Mesh(verts.astype(np.float32), tris)


def surface_height(mesh: Mesh, grid, cell: float, x, y) -> np.ndarray:
    """Height of a :func:`terrain` surface at ``(x, y)``, exact on the triangulation."""
    w, h = map(int, grid)
    z = mesh.vertices[:, 2].astype(np.float64).reshape(h, w)
    gx = np.clip(np.asarray(x, np.float64) / cell, 0, w - 1 - 1e-9)
    gy = np.clip(np.asarray(y, np.float64) / cell, 0, h - 1 - 1e-9)
    i = gx.astype(int)
    j = gy.astype(int)
    fx = gx - i
    fy = gy - j
    z00, z10, z01, z11 = z[j, i], z[j, i + 1], z[j + 1, i], z[j + 1, i + 1]
    lower = z00 + fx * (z10 - z00) + fy * (z11 - z10)
    upper = z00 + fy * (z01 - z00) + fx * (z11 - z01)
    return np.where(fx >= fy, lower, upper)


def synthesize_scene(n_rays: int, grid=PAPER_GRID, seed: int = 0, cell: float = 10.0,
                     hit_fraction: float = 0.5, drift: float = 0.3, reach: float = 1.0,
                     relief: float = 3.0) -> tuple[Mesh, SegmentBatch]:
    """Terrain plus ``n_rays`` short, mostly vertical segments.

    A fraction ``hit_fraction`` of segments straddles the surface; the rest
    sit entirely above or entirely below it (measured at their endpoints).
    ``drift`` bounds the horizontal extent and ``reach`` the vertical offset
    of each endpoint from the surface, both in units of ``cell``.
    """
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    mesh = terrain(grid, cell, seed, relief)
    w, h = map(int, grid)
    rng = np.random.default_rng([seed, 1])
    width, height = (w - 1) * cell, (h - 1) * cell
    sxy = rng.uniform((0, 0), (width, height), (n_rays, 2))
    exy = np.clip(sxy + rng.uniform(-drift, drift, (n_rays, 2)) * cell, 0, (width, height))
    hs = surface_height(mesh, grid, cell, sxy[:, 0], sxy[:, 1])
    he = surface_height(mesh, grid, cell, exy[:, 0], exy[:, 1])
    a = rng.uniform(0.05, 1.0, n_rays) * reach * cell
    b = rng.uniform(0.05, 1.0, n_rays) * reach * cell
    kind = rng.random(n_rays)
    straddle = kind < hit_fraction
    above = ~straddle & (rng.random(n_rays) < 0.5)
    below = ~straddle & ~above
    zs = np.where(straddle, hs - a, np.where(above, hs + a, hs - a))
    ze = np.where(straddle, he + b, np.where(above, he + b, he - b))
    flip = rng.random(n_rays) < 0.5
    starts = np.column_stack([sxy, zs])
    ends = np.column_stack([exy, ze])
    starts[flip], ends[flip] = ends[flip].copy(), starts[flip].copy()
    assert not np.any(below & above)
    return mesh, SegmentBatch(starts.astype(np.float32), ends.astype(np.float32))


def random_soup(n_triangles: int, seed: int = 0, spread: float = 100.0, size: float = 5.0) -> Mesh:
    """Independent random triangles scattered in a cube (no shared vertices)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, spread, (n_triangles, 1, 3))
    verts = (centers + rng.normal(0, size, (n_triangles, 3, 3))).reshape(-1, 3)
    return Mesh(verts.astype(np.float32), np.arange(3 * n_triangles, dtype=np.uint32).reshape(-1, 3))


def random_segments(n: int, lo, hi, seed: int = 0, max_length: float | None = None) -> SegmentBatch:
    """Uniform random segments inside the box ``[lo, hi]``."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, np.float64)
    hi = np.asarray(hi, np.float64)
    s = rng.uniform(lo, hi, (n, 3))
    if max_length is None:
        e = rng.uniform(lo, hi, (n, 3))
    else:
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        e = s + d * rng.uniform(0, max_length, (n, 1))
    return SegmentBatch(s.astype(np.float32), e.astype(np.float32))

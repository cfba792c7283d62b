"""Exhaustive reference engine: every segment against every triangle.

Shares only the intersection predicate with :mod:`lbvh_rsi.query`; no tree,
candidate list or post-processing code is reused.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .geometry import INDEX_DTYPE, REAL_DTYPE, Mesh, SegmentBatch, segment_hits_triangle
from .query import MODE_CODES, HitResult, QueryConfig


@njit(cache=True)
def _count_distinct(ts, tol, dcap):
    ts.sort()
    kept = 0
    last = np.float32(0.0)
    for k in range(ts.shape[0]):
        if kept == 0 or ts[k] - last > tol:
            kept += 1
            last = ts[k]
    return min(kept, dcap), kept > dcap


@njit(parallel=True, cache=True)
def _brute_kernel(verts, tris, starts, ends, mode, high, tol, dcap,
                  out_hit, out_t, out_tri, out_count, out_dover):
    ntri = tris.shape[0]
    for i in prange(starts.shape[0]):
        s = starts[i]
        e = ends[i]
        best_t = np.float32(np.inf)
        best_tri = -1
        hits = np.empty(ntri, np.float32)
        n_hits = 0
        for tid in range(ntri):
            ok, t, u, v = segment_hits_triangle(verts, tris, tid, s, e, high)
            if ok:
                hits[n_hits] = t
                n_hits += 1
                if t < best_t:
                    best_t = t
                    best_tri = tid
                if mode == 0:
                    break
        out_hit[i] = n_hits > 0
        out_t[i] = best_t
        out_tri[i] = best_tri
        if mode == 2:
            c, over = _count_distinct(hits[:n_hits], tol, dcap)
            out_count[i] = c
            out_dover[i] = over


def brute_force(mesh: Mesh, segments: SegmentBatch, cfg: QueryConfig = QueryConfig()) -> HitResult:
    """Same mode semantics as the BVH engine, computed by exhaustive search."""
    n = len(segments)
    hit = np.zeros(n, np.bool_)
    t = np.zeros(n, np.float32)
    tri = np.full(n, -1, np.int64)
    count = np.zeros(n, np.int32)
    dover = np.zeros(n, np.bool_)
    if n and mesh.n_triangles:
        _brute_kernel(mesh.vertices, mesh.triangles, segments.starts, segments.ends,
                      MODE_CODES[cfg.mode], bool(cfg.high_precision), float(cfg.dedup_tolerance),
                      int(cfg.distance_capacity), hit, t, tri, count, dover)
    tests = np.full(n, mesh.n_triangles, np.int64)
    res = HitResult(cfg.mode, n, mt_tests=tests, candidate_overflow=np.zeros(n, bool))
    if cfg.mode == "boolean":
        res.intersects = hit
    elif cfg.mode == "barycentric":
        ids = np.flatnonzero(hit)
        s = segments.starts[ids].astype(np.float64)
        e = segments.ends[ids].astype(np.float64)
        tt = t[ids].astype(np.float64)[:, None]
        res.segment_ids = ids.astype(INDEX_DTYPE)
        res.triangle_ids = tri[ids].astype(INDEX_DTYPE)
        res.points = ((1.0 - tt) * s + tt * e).astype(REAL_DTYPE)
        res.distances = (tt[:, 0] * np.linalg.norm(e - s, axis=1)).astype(REAL_DTYPE)
    else:
        res.counts = count
        res.count_overflow = dover
    return res

"""Batched segment queries against a built BVH.

Per segment: collect triangles whose leaf boxes overlap the segment's box
(bounded candidate list), run Moller-Trumbore on them, then reduce according
to the query mode. A candidate list that overflows makes that one segment fall
back to testing every triangle, so results never depend on the capacity.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numba
import numpy as np
from numba import njit, prange

from .geometry import (
    INDEX_DTYPE,
    REAL_DTYPE,
    Aabb,
    Hit,
    Mesh,
    SegmentBatch,
    intersection_distance,
    intersection_point,
    segment_boxes,
    segment_hits_triangle,
    surface_extent,
)
from .lbvh import INTERNAL, LEAF, NULL, Bvh, bvh_construct, bvh_reset
from .morton import build_sorted_order

MODES = ("boolean", "barycentric", "intercept_count")
MODE_CODES = {m: i for i, m in enumerate(MODES)}
STACK_SIZE = 128  # radix-tree depth is bounded by 64 code bits + 32 index bits


@dataclass(frozen=True)
class QueryConfig:
    """Query options.

    ``dedup_tolerance`` is relative to each segment's length: two crossings
    closer than ``dedup_tolerance * length`` count once in intercept_count mode.
    """

    mode: str = "boolean"
    high_precision: bool = False
    candidate_capacity: int = 32
    distance_capacity: int = 32
    dedup_tolerance: float = 1e-6
    fallback: bool = True

    def __post_init__(self):
        if self.mode not in MODE_CODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.candidate_capacity < 1 or self.distance_capacity < 1:
            raise ValueError("capacities must be >= 1")
        if not self.dedup_tolerance >= 0:
            raise ValueError("dedup_tolerance must be non-negative")


@dataclass
class CollisionList:
    entries: np.ndarray
    count: int
    overflowed: bool
    capacity: int

    @property
    def ids(self) -> np.ndarray:
        return self.entries[: self.count]


@dataclass
class InterceptDistances:
    values: np.ndarray
    count: int
    overflowed: bool
    capacity: int


class BarycentricHits(NamedTuple):
    segment_ids: np.ndarray
    distances: np.ndarray
    triangle_ids: np.ndarray
    points: np.ndarray


@dataclass
class HitResult:
    """Query output for one batch.

    Only the arrays belonging to ``mode`` are populated. ``mt_tests`` counts
    Moller-Trumbore evaluations per segment.
    """

    mode: str
    n_segments: int
    intersects: np.ndarray | None = None
    segment_ids: np.ndarray | None = None
    distances: np.ndarray | None = None
    triangle_ids: np.ndarray | None = None
    points: np.ndarray | None = None
    counts: np.ndarray | None = None
    candidate_overflow: np.ndarray | None = None
    count_overflow: np.ndarray | None = None
    mt_tests: np.ndarray | None = None

    def barycentric(self) -> BarycentricHits:
        return BarycentricHits(self.segment_ids, self.distances, self.triangle_ids, self.points)

    def hit_segments(self) -> np.ndarray:
        """Ids of segments with at least one crossing."""
        if self.mode == "boolean":
            return np.flatnonzero(self.intersects)
        if self.mode == "barycentric":
            return np.asarray(self.segment_ids, np.int64)
        return np.flatnonzero(self.counts > 0)

    def divergence(self, other: "HitResult", rtol: float = 1e-5) -> np.ndarray:
        """Segment ids where the two results disagree."""
        if self.mode != other.mode or self.n_segments != other.n_segments:
            raise ValueError("results are not comparable")
        bad = np.zeros(self.n_segments, bool)
        if self.mode == "boolean":
            bad |= self.intersects != other.intersects
        elif self.mode == "intercept_count":
            bad |= self.counts != other.counts
        else:
            a = _dense(self)
            b = _dense(other)
            bad |= a["hit"] != b["hit"]
            both = a["hit"] & b["hit"]
            bad[both] |= a["tri"][both] != b["tri"][both]
            for key in ("dist", "pts"):
                x, y = a[key][both], b[key][both]
                err = np.abs(x - y) > rtol * np.maximum(np.abs(y), 1e-30) + 1e-12
                bad[both] |= err.any(axis=1) if err.ndim > 1 else err
        return np.flatnonzero(bad)


def _dense(r: HitResult) -> dict:
    n = r.n_segments
    hit = np.zeros(n, bool)
    tri = np.full(n, -1, np.int64)
    dist = np.zeros(n, np.float64)
    pts = np.zeros((n, 3), np.float64)
    ids = np.asarray(r.segment_ids, np.int64)
    hit[ids] = True
    tri[ids] = r.triangle_ids
    dist[ids] = r.distances
    pts[ids] = r.points
    return {"hit": hit, "tri": tri, "dist": dist, "pts": pts}


STAGES = ("extent", "ray-bounds", "morton+sort", "bvh-build", "traversal", "post-processing", "IO")


@dataclass
class TimingBreakdown:
    seconds: dict[str, float] = field(default_factory=lambda: dict.fromkeys(STAGES, 0.0))

    @contextmanager
    def stage(self, name: str):
        if name not in self.seconds:
            raise KeyError(f"unknown stage {name!r}")
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - t0

    @property
    def total(self) -> float:
        return sum(self.seconds.values())

    def format(self) -> str:
        rows = [f"| {name:<16}| {1e3 * s:12.3f} ms |" for name, s in self.seconds.items()]
        rows.append(f"| {'total':<16}| {1e3 * self.total:12.3f} ms |")
        return "\n".join(rows)


def set_workers(k: int | None) -> int:
    """Cap kernel parallelism; ``None`` means all available threads."""
    limit = numba.config.NUMBA_NUM_THREADS
    k = limit if k is None else max(1, min(int(k), limit))
    numba.set_num_threads(k)
    return k


# --------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _boxes_overlap(amin, amax, i, bmin, bmax, j):
    for k in range(3):
        if amin[i, k] > bmax[j, k] or bmin[j, k] > amax[i, k]:
            return False
    return True


@njit(cache=True)
def _collect(qmin, qmax, q, imin, imax, irefs, lmin, lmax, ltid, root_kind, root_idx, cand, stack):
    """Gather triangle ids of leaves overlapping box ``q``; ``(count, overflowed)``."""
    cap = cand.shape[0]
    count = 0
    if root_kind == NULL:
        return 0, False
    if root_kind == LEAF:
        if _boxes_overlap(lmin, lmax, root_idx, qmin, qmax, q):
            cand[0] = ltid[root_idx]
            return 1, False
        return 0, False
    if not _boxes_overlap(imin, imax, root_idx, qmin, qmax, q):
        return 0, False
    sp = 1
    stack[0] = root_idx
    while sp > 0:
        sp -= 1
        node = stack[sp]
        for slot in range(2):
            kind = irefs[node, slot, 0]
            idx = irefs[node, slot, 1]
            if kind == LEAF:
                if _boxes_overlap(lmin, lmax, idx, qmin, qmax, q):
                    if count == cap:
                        return count, True
                    cand[count] = ltid[idx]
                    count += 1
            elif kind == INTERNAL:
                if _boxes_overlap(imin, imax, idx, qmin, qmax, q):
                    stack[sp] = idx
                    sp += 1
    return count, False


@njit(cache=True)
def _unique_count(ts, n, tol, dcap):
    """Greedy clustering over sorted ts: a value within ``tol`` of the last kept one is a repeat."""
    if n == 0:
        return 0, False
    s = np.sort(ts[:n])
    count = 1
    last = s[0]
    for k in range(1, n):
        if s[k] - last > tol:
            count += 1
            last = s[k]
    if count > dcap:
        return dcap, True
    return count, False


@njit(cache=True)
def _test_segment(verts, tris, s, e, ids, n_ids, use_ids, mode, high, ts):
    """Run MT over candidate ids (or all triangles) for one segment.

    Returns ``(n_tests, hit_any, best_t, best_tri, n_ts)``.
    """
    n_tests = 0
    hit_any = False
    best_t = np.float32(2.0)
    best_tri = -1
    n_ts = 0
    for k in range(n_ids):
        tid = ids[k] if use_ids else k
        n_tests += 1
        ok, t, u, v = segment_hits_triangle(verts, tris, tid, s, e, high)
        if not ok:
            continue
        hit_any = True
        if mode == 0:
            break
        if mode == 1:
            if t < best_t or (t == best_t and tid < best_tri):
                best_t = t
                best_tri = tid
        else:
            ts[n_ts] = t
            n_ts += 1
    return n_tests, hit_any, best_t, best_tri, n_ts


@njit(parallel=True, cache=True)
def _query_kernel(verts, tris, starts, ends, qmin, qmax,
                  imin, imax, irefs, lmin, lmax, ltid, root_kind, root_idx,
                  mode, high, cap, dcap, tol, fallback,
                  out_hit, out_t, out_tri, out_count, out_cover, out_dover, out_tests):
    nseg = starts.shape[0]
    ntri = tris.shape[0]
    nchunk = min(nseg, 1024)
    for c in prange(nchunk):
        lo = c * nseg // nchunk
        hi = (c + 1) * nseg // nchunk
        cand = np.empty(cap, np.int64)
        stack = np.empty(STACK_SIZE, np.int64)
        ts = np.empty(cap, np.float32)
        for i in range(lo, hi):
            s = starts[i]
            e = ends[i]
            n, over = _collect(qmin, qmax, i, imin, imax, irefs, lmin, lmax, ltid, root_kind, root_idx, cand, stack)
            out_cover[i] = over
            if over and fallback:
                buf = np.empty(ntri, np.float32)
                res = _test_segment(verts, tris, s, e, cand, ntri, False, mode, high, buf)
            else:
                buf = ts
                res = _test_segment(verts, tris, s, e, cand, n, True, mode, high, buf)
            n_tests, hit_any, best_t, best_tri, n_ts = res
            out_tests[i] = n_tests
            out_hit[i] = hit_any
            if mode == 1:
                out_t[i] = best_t
                out_tri[i] = best_tri
            elif mode == 2:
                cnt, dov = _unique_count(buf, n_ts, tol, dcap)
                out_count[i] = cnt
                out_dover[i] = dov


@njit(parallel=True, cache=True)
def _post_process_kernel(starts, ends, seg_ids, ts, out_dist, out_pts):
    """Distances and crossing points for hit segments (float64 math, float32 out)."""
    for k in prange(seg_ids.shape[0]):
        i = seg_ids[k]
        t = np.float64(ts[k])
        sq = 0.0
        for a in range(3):
            sa = np.float64(starts[i, a])
            ea = np.float64(ends[i, a])
            d = ea - sa
            sq += d * d
            out_pts[k, a] = np.float32((1.0 - t) * sa + t * ea)
        out_dist[k] = np.float32(t * np.sqrt(sq))


# --------------------------------------------------------------------------
# public operations


def _tree_args(bvh: Bvh):
    it, lf = bvh.internal, bvh.leaves
    root = bvh.root
    root_kind = {"null": NULL, "internal": INTERNAL, "leaf": LEAF}[root.kind]
    return (it.box_min, it.box_max, it.refs, lf.box_min, lf.box_max,
            lf.triangle_id.astype(np.int64), root_kind, root.index)


def find_candidates(bvh: Bvh, box: Aabb, cap: int = 32) -> CollisionList:
    """Triangle ids whose leaf boxes overlap ``box``, up to ``cap`` of them."""
    if cap < 1:
        raise ValueError("capacity must be >= 1")
    qmin = np.asarray(box.min, REAL_DTYPE).reshape(1, 3)
    qmax = np.asarray(box.max, REAL_DTYPE).reshape(1, 3)
    cand = np.zeros(cap, np.int64)
    stack = np.empty(STACK_SIZE, np.int64)
    n, over = _collect(qmin, qmax, 0, *_tree_args(bvh), cand, stack)
    return CollisionList(cand.astype(INDEX_DTYPE), int(n), bool(over), cap)


def _raw_query(mesh: Mesh, bvh: Bvh, segments: SegmentBatch, cfg: QueryConfig, boxes=None) -> dict:
    n = len(segments)
    if boxes is None:
        boxes = segment_boxes(segments)
    out = {
        "hit": np.zeros(n, np.bool_),
        "t": np.zeros(n, np.float32),
        "tri": np.full(n, -1, np.int64),
        "count": np.zeros(n, np.int32),
        "cover": np.zeros(n, np.bool_),
        "dover": np.zeros(n, np.bool_),
        "tests": np.zeros(n, np.int64),
    }
    if n == 0:
        return out
    _query_kernel(
        mesh.vertices, mesh.triangles, segments.starts, segments.ends, boxes[0], boxes[1],
        *_tree_args(bvh),
        MODE_CODES[cfg.mode], bool(cfg.high_precision), int(cfg.candidate_capacity),
        int(cfg.distance_capacity), float(cfg.dedup_tolerance), bool(cfg.fallback),
        out["hit"], out["t"], out["tri"], out["count"], out["cover"], out["dover"], out["tests"],
    )
    return out


def post_process(segments: SegmentBatch, seg_ids: np.ndarray, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Data-parallel distances and crossing points for the given hits."""
    seg_ids = np.ascontiguousarray(seg_ids, np.int64)
    ts = np.ascontiguousarray(ts, np.float32)
    dist = np.zeros(len(seg_ids), REAL_DTYPE)
    pts = np.zeros((len(seg_ids), 3), REAL_DTYPE)
    if len(seg_ids):
        _post_process_kernel(segments.starts, segments.ends, seg_ids, ts, dist, pts)
    return dist, pts


def post_process_sequential(segments: SegmentBatch, seg_ids, ts) -> tuple[np.ndarray, np.ndarray]:
    """Reference loop over :func:`intersection_distance` / :func:`intersection_point`."""
    dist = np.zeros(len(seg_ids), REAL_DTYPE)
    pts = np.zeros((len(seg_ids), 3), REAL_DTYPE)
    for k, (i, t) in enumerate(zip(seg_ids, ts)):
        seg = segments[int(i)]
        hit = Hit(float(t), 0.0, 0.0)
        dist[k] = intersection_distance(seg, hit)
        pts[k] = intersection_point(seg, hit)
    return dist, pts


def _finish(raw: dict, segments: SegmentBatch, cfg: QueryConfig) -> HitResult:
    res = HitResult(cfg.mode, len(segments), candidate_overflow=raw["cover"], mt_tests=raw["tests"])
    if cfg.mode == "boolean":
        res.intersects = raw["hit"]
    elif cfg.mode == "barycentric":
        ids = np.flatnonzero(raw["hit"])
        dist, pts = post_process(segments, ids, raw["t"][ids])
        res.segment_ids = ids.astype(INDEX_DTYPE)
        res.triangle_ids = raw["tri"][ids].astype(INDEX_DTYPE)
        res.distances = dist
        res.points = pts
    else:
        res.counts = raw["count"]
        res.count_overflow = raw["dover"]
    return res


def query(mesh: Mesh, bvh: Bvh, segments: SegmentBatch, cfg: QueryConfig = QueryConfig()) -> HitResult:
    return _finish(_raw_query(mesh, bvh, segments, cfg), segments, cfg)


def query_boolean(mesh, bvh, segments, cfg: QueryConfig = QueryConfig()) -> np.ndarray:
    return query(mesh, bvh, segments, _with_mode(cfg, "boolean")).intersects


def query_barycentric(mesh, bvh, segments, cfg: QueryConfig = QueryConfig()) -> BarycentricHits:
    return query(mesh, bvh, segments, _with_mode(cfg, "barycentric")).barycentric()


def query_intercept_count(mesh, bvh, segments, cfg: QueryConfig = QueryConfig()) -> np.ndarray:
    return query(mesh, bvh, segments, _with_mode(cfg, "intercept_count")).counts


def _with_mode(cfg: QueryConfig, mode: str) -> QueryConfig:
    if cfg.mode == mode:
        return cfg
    return replace(cfg, mode=mode)


def build(mesh: Mesh, timing: TimingBreakdown | None = None) -> Bvh:
    """Extent, Morton sort and tree construction for ``mesh``."""
    timing = timing or TimingBreakdown()
    with timing.stage("extent"):
        extent = surface_extent(mesh)
    with timing.stage("morton+sort"):
        order = build_sorted_order(mesh, extent)
    with timing.stage("bvh-build"):
        bvh = bvh_construct(bvh_reset(mesh, order))
    return bvh


def run_pipeline(mesh: Mesh, segments: SegmentBatch, cfg: QueryConfig = QueryConfig()) -> tuple[HitResult, TimingBreakdown]:
    """Full flow: extent, ray bounds, Morton sort, build, traversal, post-processing.

    Raises :class:`~lbvh_rsi.lbvh.BvhIntegrityError` (carrying the validator
    report) if the tree does not come out whole.
    """
    timing = TimingBreakdown()
    with timing.stage("extent"):
        extent = surface_extent(mesh)
    with timing.stage("ray-bounds"):
        boxes = segment_boxes(segments)
    with timing.stage("morton+sort"):
        order = build_sorted_order(mesh, extent)
    with timing.stage("bvh-build"):
        bvh = bvh_construct(bvh_reset(mesh, order))
    with timing.stage("traversal"):
        raw = _raw_query(mesh, bvh, segments, cfg, boxes)
    with timing.stage("post-processing"):
        result = _finish(raw, segments, cfg)
    return result, timing

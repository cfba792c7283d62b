"""Linear BVH: binary radix tree over Morton-sorted triangles.

Layout follows the classic GPU builder: ``N`` leaf records (one per sorted
triangle) and ``N`` internal records of which slots ``0 .. N-2`` are the tree
nodes and slot ``N-1`` is a sentinel whose left child points at the root.
Internal node ``i`` always owns the split between leaves ``i`` and ``i + 1``.

Construction is bottom-up: every leaf climbs towards the root, and at each
internal node an arrival counter decides whether the climb continues (second
arrival, both children final) or stops (first arrival).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .geometry import REAL_DTYPE, Aabb, Mesh, triangle_boxes
from .morton import MORTON_DTYPE, SortedOrder

NULL, INTERNAL, LEAF = 0, 1, 2
KIND_NAMES = {NULL: "null", INTERNAL: "internal", LEAF: "leaf"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}

# slots of NodeArray.refs[:, slot, :]
CHILD_L, CHILD_R, PARENT = 0, 1, 2


class NodeRef(NamedTuple):
    kind: str
    index: int = 0

    @classmethod
    def null(cls) -> "NodeRef":
        return cls("null", 0)

    @property
    def is_null(self) -> bool:
        return self.kind == "null"

    def __str__(self) -> str:
        return "null" if self.is_null else f"{self.kind} {self.index}"


@dataclass
class NodeArray:
    """Struct-of-arrays storage for ``n`` BVH node records.

    ``refs[i, slot] = (kind, index)`` for slot in (CHILD_L, CHILD_R, PARENT);
    ``ranges[i] = (range_l, range_r)``.
    """

    box_min: np.ndarray
    box_max: np.ndarray
    triangle_id: np.ndarray
    ranges: np.ndarray
    arrivals: np.ndarray
    refs: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "NodeArray":
        return cls(
            box_min=np.zeros((n, 3), REAL_DTYPE),
            box_max=np.zeros((n, 3), REAL_DTYPE),
            triangle_id=np.zeros(n, np.uint32),
            ranges=np.zeros((n, 2), np.int32),
            arrivals=np.zeros(n, np.int32),
            refs=np.zeros((n, 3, 2), np.int32),
        )

    def __len__(self) -> int:
        return len(self.arrivals)

    def ref(self, i: int, slot: int) -> NodeRef:
        kind, idx = self.refs[i, slot]
        return NodeRef(KIND_NAMES[int(kind)], int(idx) if kind != NULL else 0)

    def box(self, i: int) -> Aabb:
        return Aabb(self.box_min[i].copy(), self.box_max[i].copy())

    def copy(self) -> "NodeArray":
        return NodeArray(*(np.array(getattr(self, f)) for f in self.__dataclass_fields__))


@dataclass(frozen=True)
class BvhNode:
    """Read-only view of one node record."""

    index: int
    kind: str
    box: Aabb
    triangle_id: int
    range_l: int
    range_r: int
    arrivals: int
    child_l: NodeRef
    child_r: NodeRef
    parent: NodeRef


@dataclass
class Bvh:
    internal: NodeArray
    leaves: NodeArray
    order: SortedOrder

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def sentinel(self) -> int:
        return self.n_leaves - 1

    @property
    def root(self) -> NodeRef:
        return self.internal.ref(self.sentinel, CHILD_L)

    def node(self, ref: NodeRef | tuple[str, int]) -> BvhNode:
        kind, i = ref
        arr = self.internal if kind == "internal" else self.leaves
        return BvhNode(
            index=int(i),
            kind=kind,
            box=arr.box(i),
            triangle_id=int(arr.triangle_id[i]),
            range_l=int(arr.ranges[i, 0]),
            range_r=int(arr.ranges[i, 1]),
            arrivals=int(arr.arrivals[i]),
            child_l=arr.ref(i, CHILD_L),
            child_r=arr.ref(i, CHILD_R),
            parent=arr.ref(i, PARENT),
        )

    def copy(self) -> "Bvh":
        return Bvh(self.internal.copy(), self.leaves.copy(), self.order)


class BvhIntegrityError(RuntimeError):
    """Construction produced a tree that fails validation."""

    def __init__(self, report: "IntegrityReport"):
        super().__init__("BVH integrity check failed:\n" + report.summary())
        self.report = report


def bvh_reset(mesh: Mesh, order: SortedOrder) -> Bvh:
    """Allocate both node arrays; leaves get their sorted triangle and box."""
    n = len(order)
    if n != mesh.n_triangles:
        raise ValueError(f"order covers {n} triangles, mesh has {mesh.n_triangles}")
    if n < 1:
        raise ValueError("BVH needs at least one triangle")
    lo, hi = triangle_boxes(mesh)
    perm = order.permutation
    leaves = NodeArray.zeros(n)
    leaves.triangle_id[:] = perm
    leaves.box_min[:] = lo[perm]
    leaves.box_max[:] = hi[perm]
    leaves.ranges[:, 0] = np.arange(n, dtype=np.int32)
    leaves.ranges[:, 1] = np.arange(n, dtype=np.int32)
    internal = NodeArray.zeros(n)
    internal.ranges[:, 1] = -1
    return Bvh(internal, leaves, order)


def _clz64(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=MORTON_DTYPE, ndmin=1)
    n = np.zeros(x.shape, np.int64)
    y = x.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        empty = (y >> np.uint64(64 - shift)) == 0
        n[empty] += shift
        y[empty] <<= np.uint64(shift)
    n[x == 0] = 64
    return n


def common_prefix(codes_a, codes_b, idx_a, idx_b) -> np.ndarray:
    """Leading common bits of the augmented keys ``code || 32-bit index``."""
    ca = np.asarray(codes_a, MORTON_DTYPE)
    cb = np.asarray(codes_b, MORTON_DTYPE)
    same = ca == cb
    out = _clz64(ca ^ cb)
    idx_x = (np.asarray(idx_a, np.int64) ^ np.asarray(idx_b, np.int64)).astype(np.uint64)
    out_idx = 64 + _clz64(idx_x) - 32
    return np.where(same, out_idx, out)


def delta(i: int, j: int, codes: np.ndarray) -> int:
    """Common-prefix length between sorted keys i and j, -1 if j is out of range."""
    n = len(codes)
    if j < 0 or j > n - 1:
        return -1
    return int(common_prefix(codes[i], codes[j], i, j)[0])


def adjacent_deltas(codes: np.ndarray) -> np.ndarray:
    """``delta(i, i + 1)`` for i in 0 .. n-2."""
    codes = np.asarray(codes, MORTON_DTYPE)
    n = len(codes)
    if n < 2:
        return np.zeros(0, np.int64)
    idx = np.arange(n - 1)
    return common_prefix(codes[:-1], codes[1:], idx, idx + 1)


@njit(cache=True)
def _merge_box(dst_min, dst_max, p, src_min, src_max, c, first):
    for k in range(3):
        if first or src_min[c, k] < dst_min[p, k]:
            dst_min[p, k] = src_min[c, k]
        if first or src_max[c, k] > dst_max[p, k]:
            dst_max[p, k] = src_max[c, k]


@njit(cache=True)
def _ascend(leaf_ids, adj, imin, imax, irefs, iranges, iarr, lmin, lmax, lrefs):
    n = lmin.shape[0]
    sentinel = n - 1
    for k in range(leaf_ids.shape[0]):
        cur = leaf_ids[k]
        kind = LEAF
        lo = cur
        hi = cur
        while True:
            if lo == 0 and hi == n - 1:
                irefs[sentinel, CHILD_L, 0] = kind
                irefs[sentinel, CHILD_L, 1] = cur
                break
            dl = adj[lo - 1] if lo > 0 else -1
            dr = adj[hi] if hi < n - 1 else -1
            if dl > dr:
                p = lo - 1
                irefs[p, CHILD_R, 0] = kind
                irefs[p, CHILD_R, 1] = cur
                iranges[p, 1] = hi
            else:
                p = hi
                irefs[p, CHILD_L, 0] = kind
                irefs[p, CHILD_L, 1] = cur
                iranges[p, 0] = lo
            if kind == LEAF:
                lrefs[cur, PARENT, 0] = INTERNAL
                lrefs[cur, PARENT, 1] = p
            else:
                irefs[cur, PARENT, 0] = INTERNAL
                irefs[cur, PARENT, 1] = p
            iarr[p] += 1
            if iarr[p] == 1:
                break
            for slot in range(2):
                c = irefs[p, slot, 1]
                if irefs[p, slot, 0] == LEAF:
                    _merge_box(imin, imax, p, lmin, lmax, c, slot == 0)
                else:
                    _merge_box(imin, imax, p, imin, imax, c, slot == 0)
            lo = iranges[p, 0]
            hi = iranges[p, 1]
            cur = p
            kind = INTERNAL


def ascend_leaves(bvh: Bvh, leaf_ids) -> Bvh:
    """Run the bottom-up climb for the given leaves only (in order)."""
    adj = adjacent_deltas(bvh.order.sorted_codes)
    ids = np.ascontiguousarray(leaf_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= bvh.n_leaves):
        raise IndexError("leaf id out of range")
    i, lf = bvh.internal, bvh.leaves
    _ascend(ids, adj, i.box_min, i.box_max, i.refs, i.ranges, i.arrivals,
            lf.box_min, lf.box_max, lf.refs)
    return bvh


def bvh_construct(bvh: Bvh, check: bool = True) -> Bvh:
    """Link the tree in place. Every leaf is processed; coverage is ``N_t``.

    Raises :class:`BvhIntegrityError` if the result does not validate.
    """
    ascend_leaves(bvh, np.arange(bvh.n_leaves))
    if check:
        n = bvh.n_leaves
        if bvh.root.is_null or np.any(bvh.internal.arrivals[: n - 1] != 2):
            raise BvhIntegrityError(bvh_validate(bvh))
    return bvh


def build_bvh(mesh: Mesh, order: SortedOrder) -> Bvh:
    return bvh_construct(bvh_reset(mesh, order))


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    check: str
    message: str
    node: NodeRef | None = None

    def __str__(self) -> str:
        where = f" [{self.node}]" if self.node is not None else ""
        return f"{self.check}{where}: {self.message}"


@dataclass
class IntegrityReport:
    n_leaves: int
    violations: list[Violation] = field(default_factory=list)
    half_filled: list[int] = field(default_factory=list)
    untouched: list[int] = field(default_factory=list)
    used_internal: int = 0
    root: NodeRef = NodeRef.null()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def null_root(self) -> bool:
        return self.root.is_null

    def checks_failed(self) -> set[str]:
        return {v.check for v in self.violations}

    def summary(self, limit: int = 20) -> str:
        if self.ok:
            return f"BVH OK: {self.n_leaves} leaves, {self.used_internal} internal nodes, root {self.root}"
        lines = [str(v) for v in self.violations[:limit]]
        if len(self.violations) > limit:
            lines.append(f"... {len(self.violations) - limit} more")
        return "\n".join(lines)


def _ids(a, limit=8) -> str:
    a = list(map(int, a))
    s = ", ".join(map(str, a[:limit]))
    return s + (f", ... ({len(a)} total)" if len(a) > limit else "")


def bvh_validate(bvh: Bvh) -> IntegrityReport:
    """Check a (possibly broken) tree and list every violation found."""
    n = bvh.n_leaves
    it, lf = bvh.internal, bvh.leaves
    rep = IntegrityReport(n_leaves=n, root=bvh.root)
    add = rep.violations.append
    used = np.arange(n - 1)

    # (a) leaf triangle ids form a bijection onto 0..n-1
    tid = lf.triangle_id.astype(np.int64)
    out_of_range = np.flatnonzero(tid >= n)
    counts = np.bincount(tid[tid < n], minlength=n)
    if out_of_range.size:
        add(Violation("leaf-bijection", f"triangle id out of range in leaves {_ids(out_of_range)}"))
    dup = np.flatnonzero(counts > 1)
    missing = np.flatnonzero(counts == 0)
    for t in dup[:16]:
        leaves = np.flatnonzero(tid == t)
        add(Violation("leaf-bijection", f"triangle {t} repeated in leaves {_ids(leaves)}"))
    if missing.size:
        add(Violation("leaf-bijection", f"triangles missing from leaves: {_ids(missing)}"))

    # (b) arrival counters, (c) used node count
    arr = it.arrivals[: n - 1]
    rep.half_filled = np.flatnonzero(arr == 1).tolist()
    rep.untouched = np.flatnonzero(arr == 0).tolist()
    rep.used_internal = int(np.count_nonzero(arr == 2))
    if rep.half_filled:
        add(Violation("arrivals", f"half-filled internal nodes (arrivals == 1): {_ids(rep.half_filled)}"))
    if rep.untouched:
        add(Violation("arrivals", f"untouched internal nodes (arrivals == 0): {_ids(rep.untouched)}"))
    odd = np.flatnonzero(arr > 2)
    if odd.size:
        add(Violation("arrivals", f"internal nodes with arrivals > 2: {_ids(odd)}"))
    if it.arrivals[n - 1] != 0:
        add(Violation("arrivals", "sentinel node was used as a tree node", NodeRef("internal", n - 1)))
    if rep.used_internal != n - 1:
        add(Violation("used-count", f"{rep.used_internal} internal nodes completed, expected {n - 1}"))

    # (d) root link
    if rep.root.is_null:
        add(Violation("root", "sentinel holds a null root link; tree cannot be traversed",
                      NodeRef("internal", n - 1)))

    # (e) links, (f) boxes, (g) ranges on completed nodes
    for p in used[arr == 2]:
        me = NodeRef("internal", int(p))
        kids = [it.ref(p, CHILD_L), it.ref(p, CHILD_R)]
        if any(k.is_null for k in kids):
            add(Violation("links", "completed node has a null child", me))
            continue
        boxes = []
        kid_ranges = []
        for k in kids:
            arrk = it if k.kind == "internal" else lf
            if k.index >= n:
                add(Violation("links", f"child {k} out of range", me))
                break
            if arrk.ref(k.index, PARENT) != me:
                add(Violation("links", f"child {k} points to parent {arrk.ref(k.index, PARENT)}", me))
            boxes.append(arrk.box(k.index))
            kid_ranges.append(tuple(arrk.ranges[k.index]))
        else:
            pbox = it.box(p)
            for k, b in zip(kids, boxes):
                if not pbox.contains(b):
                    add(Violation("containment", f"child {k} box escapes parent box", me))
            u = boxes[0].union(boxes[1])
            if not (np.array_equal(u.min, pbox.min) and np.array_equal(u.max, pbox.max)):
                add(Violation("containment", "box is not the exact union of its children", me))
            (l0, r0), (l1, r1) = kid_ranges
            if r0 + 1 != l1 or (l0, r1) != tuple(it.ranges[p]):
                add(Violation("ranges", f"range {tuple(map(int, it.ranges[p]))} is not children "
                              f"{(int(l0), int(r0))} ++ {(int(l1), int(r1))}", me))

    for i in range(n):
        if tuple(lf.ranges[i]) != (i, i):
            add(Violation("ranges", f"leaf range {tuple(map(int, lf.ranges[i]))}", NodeRef("leaf", i)))
    orphans = np.flatnonzero(lf.refs[:, PARENT, 0] == NULL)
    if n > 1 and orphans.size:
        add(Violation("links", f"leaves without a parent: {_ids(orphans)}"))
    for i in np.flatnonzero(lf.refs[:, PARENT, 0] == INTERNAL):
        p = int(lf.refs[i, PARENT, 1])
        if p >= n or NodeRef("leaf", int(i)) not in (it.ref(p, CHILD_L), it.ref(p, CHILD_R)):
            add(Violation("links", f"parent internal {p} does not list this leaf", NodeRef("leaf", int(i))))

    if not rep.root.is_null:
        root = rep.root
        arr_r = it if root.kind == "internal" else lf
        if root.index >= n:
            add(Violation("root", f"root link {root} out of range"))
        else:
            if not arr_r.ref(root.index, PARENT).is_null:
                add(Violation("links", "root has a parent", root))
            if tuple(arr_r.ranges[root.index]) != (0, n - 1):
                add(Violation("ranges", f"root covers {tuple(map(int, arr_r.ranges[root.index]))}, "
                              f"expected (0, {n - 1})", root))
            seen = _reachable_leaves(bvh)
            if seen is None:
                add(Violation("links", "cycle or runaway depth below the root", root))
            else:
                if np.any(seen != 1):
                    add(Violation("ranges", f"leaves not reached exactly once from root: "
                                  f"{_ids(np.flatnonzero(seen != 1))}"))
    return rep


def _reachable_leaves(bvh: Bvh) -> np.ndarray | None:
    n = bvh.n_leaves
    seen = np.zeros(n, np.int64)
    stack = [bvh.root]
    visited = 0
    while stack:
        ref = stack.pop()
        visited += 1
        if visited > 2 * n:
            return None
        if ref.kind == "leaf":
            seen[ref.index] += 1
        elif ref.kind == "internal":
            stack.append(bvh.internal.ref(ref.index, CHILD_R))
            stack.append(bvh.internal.ref(ref.index, CHILD_L))
    return seen


def depth_bound(bvh: Bvh) -> int:
    """Longest root-to-leaf path (edges)."""
    best = 0
    stack = [(bvh.root, 0)]
    while stack:
        ref, d = stack.pop()
        if ref.kind == "internal":
            for slot in (CHILD_L, CHILD_R):
                stack.append((bvh.internal.ref(ref.index, slot), d + 1))
        else:
            best = max(best, d)
    return best

"""Inspecting a BVH: flat word streams, text dumps and Graphviz output.

The serialized form mimics copying node arrays off a device: each node is a
block of 32-bit words whose meaning is given by a :class:`WireNodeLayout`.
Decoding splits the block back into real-valued bounds and integer fields.
References are written as ``(kind tag, index)`` word pairs, never addresses,
so dumps are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import REAL_DTYPE, Mesh, surface_extent
from .lbvh import (
    CHILD_L,
    CHILD_R,
    KIND_CODES,
    KIND_NAMES,
    PARENT,
    Bvh,
    NodeRef,
    ascend_leaves,
    bvh_reset,
    bvh_validate,
)
from .morton import build_sorted_order

WORD = np.dtype("<i4")


class WireFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    name: str
    offset: int  # in words
    width: int  # in words
    type: str  # "real32" | "int32" | "ref"


@dataclass(frozen=True)
class WireNodeLayout:
    fields: tuple[FieldSpec, ...]
    words_per_node: int

    def __post_init__(self):
        used = np.zeros(self.words_per_node, int)
        for f in self.fields:
            if f.type not in ("real32", "int32", "ref"):
                raise WireFormatError(f"field {f.name}: unknown type {f.type!r}")
            if f.type == "ref" and f.width != 2:
                raise WireFormatError(f"field {f.name}: references take 2 words")
            if f.offset < 0 or f.offset + f.width > self.words_per_node:
                raise WireFormatError(f"field {f.name} does not fit in {self.words_per_node} words")
            used[f.offset:f.offset + f.width] += 1
        if np.any(used > 1):
            raise WireFormatError("layout has overlapping fields")

    def field(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    @classmethod
    def build(cls, specs: Iterable[tuple[str, int, str]], padding: int = 0) -> "WireNodeLayout":
        """Pack ``(name, width, type)`` specs back to back, plus trailing padding words."""
        fields, offset = [], 0
        for name, width, kind in specs:
            fields.append(FieldSpec(name, offset, width, kind))
            offset += width
        return cls(tuple(fields), offset + padding)


DEFAULT_LAYOUT = WireNodeLayout.build([
    ("box_min", 3, "real32"),
    ("box_max", 3, "real32"),
    ("triangle_id", 1, "int32"),
    ("range_l", 1, "int32"),
    ("range_r", 1, "int32"),
    ("arrivals", 1, "int32"),
    ("self", 2, "ref"),
    ("parent", 2, "ref"),
    ("child_l", 2, "ref"),
    ("child_r", 2, "ref"),
])


@dataclass(frozen=True)
class NodeDump:
    index: int
    box_min: tuple[float, float, float]
    box_max: tuple[float, float, float]
    triangle_id: int
    range_l: int
    range_r: int
    arrivals: int
    self_ref: NodeRef
    parent: NodeRef
    child_l: NodeRef
    child_r: NodeRef

    @property
    def kind(self) -> str:
        return self.self_ref.kind

    def text(self, extra: bool = True, is_root: bool = False, sentinel: bool = False) -> str:
        def bounds(k):
            return f"[{str(np.float32(self.box_min[k]))},{str(np.float32(self.box_max[k]))}]"

        head = f"[{self.index}] x:{bounds(0)}, y:{bounds(1)}, z:{bounds(2)}"
        if is_root:
            head += "  ------ ROOT NODE"
        lines = [head]
        if extra:
            lines.append(f"self: {self.self_ref}, parent: {self.parent}")
        if self.kind == "leaf":
            lines.append(f"triangleID: {self.triangle_id}")
            if not extra:
                lines[-1] += f", rangeL: {self.range_l}, rangeR: {self.range_r}"
            return "\n".join(lines)
        if extra:
            lines.append(
                f"indices: {self.index}(self), {self.child_l.index}(L-{self.child_l.kind}), "
                f"{self.child_r.index}(R-{self.child_r.kind})"
            )
        root_note = "(root node)" if sentinel and not self.child_l.is_null else ""
        lines.append(f"childL: {self.child_l}{root_note}, childR: {self.child_r}")
        lines.append(f"atomic: {self.arrivals}, rangeL: {self.range_l}, rangeR: {self.range_r}")
        return "\n".join(lines)


def _encode_ref(kind_codes: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.column_stack([kind_codes, idx]).astype(WORD)


def _node_words(arr, kind: str, layout: WireNodeLayout) -> np.ndarray:
    n = len(arr)
    words = np.zeros((n, layout.words_per_node), WORD)
    ref_slots = {"parent": PARENT, "child_l": CHILD_L, "child_r": CHILD_R}
    for f in layout.fields:
        if f.name in ("box_min", "box_max"):
            vals = getattr(arr, f.name).astype(REAL_DTYPE).view(WORD)
        elif f.name == "triangle_id":
            vals = arr.triangle_id.astype(np.uint32).view(WORD)[:, None]
        elif f.name in ("range_l", "range_r"):
            vals = arr.ranges[:, 0 if f.name == "range_l" else 1, None]
        elif f.name == "arrivals":
            vals = arr.arrivals[:, None]
        elif f.name == "self":
            vals = _encode_ref(np.full(n, KIND_CODES[kind]), np.arange(n))
        elif f.name in ref_slots:
            vals = arr.refs[:, ref_slots[f.name], :]
        else:
            raise WireFormatError(f"no node attribute for layout field {f.name!r}")
        words[:, f.offset:f.offset + f.width] = np.asarray(vals).reshape(n, f.width)
    return words


def serialize_nodes(bvh: Bvh, layout: WireNodeLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Flat int32 word stream: all internal node blocks, then all leaf blocks."""
    return np.concatenate([
        _node_words(bvh.internal, "internal", layout).ravel(),
        _node_words(bvh.leaves, "leaf", layout).ravel(),
    ])


def _decode_ref(words) -> NodeRef:
    kind = int(words[0])
    if kind not in KIND_NAMES:
        raise WireFormatError(f"bad reference tag {kind}")
    return NodeRef(KIND_NAMES[kind], int(words[1]) if kind else 0)


def decode_nodes(stream, layout: WireNodeLayout = DEFAULT_LAYOUT, n: int | None = None,
                 first_index: int = 0) -> list[NodeDump]:
    """Interpret ``n`` consecutive node blocks of ``stream``.

    Real fields are reinterpreted from the raw words; integer and reference
    fields are read directly. When the layout has no ``self`` field, nodes are
    labelled by position starting at ``first_index``.
    """
    if isinstance(stream, (bytes, bytearray, memoryview)):
        stream = np.frombuffer(stream, WORD)
    words = np.asarray(stream)
    if words.dtype != WORD:
        if words.dtype.itemsize != 4:
            raise WireFormatError(f"stream must hold 32-bit words, got {words.dtype}")
        words = words.view(WORD)
    w = layout.words_per_node
    if n is None:
        n = len(words) // w
    if len(words) != n * w:
        raise WireFormatError(f"stream has {len(words)} words, expected {n} nodes x {w} words")
    blocks = words.reshape(n, w)
    names = {f.name for f in layout.fields}
    out = []
    for k, block in enumerate(blocks):
        vals = {}
        for f in layout.fields:
            raw = block[f.offset:f.offset + f.width]
            if f.type == "real32":
                vals[f.name] = tuple(float(x) for x in raw.view(REAL_DTYPE))
            elif f.type == "ref":
                vals[f.name] = _decode_ref(raw)
            else:
                vals[f.name] = int(raw[0])
        self_ref = vals.get("self", NodeRef("internal", first_index + k))
        out.append(NodeDump(
            index=self_ref.index if "self" in names else first_index + k,
            box_min=vals.get("box_min", (0.0, 0.0, 0.0)),
            box_max=vals.get("box_max", (0.0, 0.0, 0.0)),
            triangle_id=vals.get("triangle_id", 0) & 0xFFFFFFFF,
            range_l=vals.get("range_l", 0),
            range_r=vals.get("range_r", 0),
            arrivals=vals.get("arrivals", 0),
            self_ref=self_ref,
            parent=vals.get("parent", NodeRef.null()),
            child_l=vals.get("child_l", NodeRef.null()),
            child_r=vals.get("child_r", NodeRef.null()),
        ))
    return out


def node_dumps(bvh: Bvh) -> tuple[list[NodeDump], list[NodeDump]]:
    """Decoded ``(internal, leaves)`` for a tree, via the default layout."""
    n = bvh.n_leaves
    stream = serialize_nodes(bvh)
    w = DEFAULT_LAYOUT.words_per_node
    return decode_nodes(stream[: n * w], n=n), decode_nodes(stream[n * w:], n=n)


def format_dump(bvh: Bvh, extra: bool = True, nodes: Iterable[int] | None = None) -> str:
    """Text listing of every node, internal nodes first, ascending index."""
    internal, leaves = node_dumps(bvh)
    root = bvh.root
    keep = set(nodes) if nodes is not None else None
    sep = "---------------------------"
    lines = ["BVH tree structure", sep, "Internal nodes"]
    for d in internal:
        if keep is None or d.index in keep:
            lines.append(d.text(extra, is_root=root == d.self_ref, sentinel=d.index == bvh.sentinel))
            lines.append("")
    lines += [sep, "Leaf nodes"]
    for d in leaves:
        if keep is None or d.index in keep:
            lines.append(d.text(extra, is_root=root == d.self_ref))
            lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _dot_id(ref: NodeRef) -> str:
    return f"{'i' if ref.kind == 'internal' else 'l'}{ref.index}"


def emit_dot(bvh: Bvh) -> str:
    """Graphviz description of the tree.

    Internal nodes are labelled ``[a,b]`` with their leaf range; leaves are
    boxes labelled ``[c] d`` (leaf index, triangle id). A point-shaped
    ``sentinel`` node links to the root. Trees that fail validation are still
    drawn; offending nodes are coloured red and violations listed as comments.
    """
    report = bvh_validate(bvh)
    it, lf = bvh.internal, bvh.leaves
    n = bvh.n_leaves
    flagged = {v.node for v in report.violations if v.node is not None}
    flagged |= {NodeRef("internal", i) for i in report.half_filled}

    out = ["digraph bvh {", '  graph [ordering="out"];', "  node [fontname=\"Helvetica\"];"]
    for v in report.violations:
        out.append(f"  // violation: {str(v).replace(chr(10), ' ')}")
    out.append('  sentinel [shape=point, label=""];')
    for i in range(n - 1):
        if it.arrivals[i] == 0:
            continue
        ref = NodeRef("internal", i)
        a, b = it.ranges[i]
        label = f"[{a},{b}]"
        attrs = f'label="{label}", shape=ellipse'
        if ref in flagged:
            attrs += f', color=red, xlabel="arrivals={int(it.arrivals[i])}"'
        out.append(f"  {_dot_id(ref)} [{attrs}];")
    for c in range(n):
        ref = NodeRef("leaf", c)
        attrs = f'label="[{c}] {int(lf.triangle_id[c])}", shape=box'
        if ref in flagged or lf.refs[c, PARENT, 0] == 0 and n > 1:
            attrs += ", color=red"
        out.append(f"  {_dot_id(ref)} [{attrs}];")
    if not bvh.root.is_null:
        out.append(f"  sentinel -> {_dot_id(bvh.root)};")
    for i in range(n - 1):
        if it.arrivals[i] == 0:
            continue
        for slot in (CHILD_L, CHILD_R):
            child = it.ref(i, slot)
            if not child.is_null:
                out.append(f"  i{i} -> {_dot_id(child)};")
    out.append("}")
    return "\n".join(out) + "\n"


def write_dot(bvh: Bvh, path="bvh_structure.gv") -> Path:
    path = Path(path)
    path.write_text(emit_dot(bvh), encoding="utf-8")
    return path


def construct_partial(mesh: Mesh, n_processed: int) -> Bvh:
    """Fresh tree where only the first ``n_processed`` leaves climbed, as an undersized launch would.

    Debug harness for reproducing an incompletely built tree; unless every
    leaf is processed the result fails :func:`~lbvh_rsi.lbvh.bvh_validate`.
    """
    bvh = bvh_reset(mesh, build_sorted_order(mesh, surface_extent(mesh)))
    n_processed = max(0, min(int(n_processed), bvh.n_leaves))
    return ascend_leaves(bvh, np.arange(n_processed))

import numpy as np
import pydot
import pytest

from lbvh_rsi.diagnostics import (
    DEFAULT_LAYOUT,
    WireFormatError,
    WireNodeLayout,
    construct_partial,
    decode_nodes,
    emit_dot,
    format_dump,
    node_dumps,
    serialize_nodes,
    write_dot,
)
from lbvh_rsi.lbvh import NodeRef
from lbvh_rsi.query import build
from lbvh_rsi.synthesis import random_soup

PAPER_INTERNAL_0 = """[0] x:[12.0,13.0], y:[2.0,3.0], z:[1.0,1.2]
self: internal 0, parent: internal 1
indices: 0(self), 0(L-leaf), 1(R-leaf)
childL: leaf 0, childR: leaf 1
atomic: 2, rangeL: 0, rangeR: 1"""


def _dot_nodes(text):
    g = pydot.graph_from_dot_data(text)[0]
    names = [n.get_name() for n in g.get_nodes() if n.get_name() not in ("node", "edge", "graph")]
    return g, names


def test_dump_matches_listing_style(simple):
    text = format_dump(build(simple[0]))
    assert text.startswith("BVH tree structure\n---------------------------\nInternal nodes\n")
    assert PAPER_INTERNAL_0 in text
    assert "[1] x:[12.0,13.0], y:[2.0,3.0], z:[1.0,1.3]  ------ ROOT NODE" in text
    assert "[3] x:[0.0,0.0], y:[0.0,0.0], z:[0.0,0.0]" in text
    assert "atomic: 0, rangeL: 0, rangeR: -1" in text
    assert "[1] x:[12.0,12.5], y:[2.0,3.0], z:[1.0,1.2]\nself: leaf 1, parent: internal 0\ntriangleID: 3" in text


def test_dump_can_select_nodes_and_drop_extras(simple):
    text = format_dump(build(simple[0]), extra=False, nodes=[0])
    assert "self:" not in text and "indices:" not in text
    assert "[1]" not in text and "[0] x:[12.0,13.0]" in text


def test_serialize_roundtrip(simple):
    bvh = build(simple[0])
    stream = serialize_nodes(bvh)
    assert stream.dtype == np.dtype("<i4")
    assert stream.size == 2 * bvh.n_leaves * DEFAULT_LAYOUT.words_per_node
    internal, leaves = node_dumps(bvh)
    again = decode_nodes(stream.tobytes(), n=2 * bvh.n_leaves)
    assert again[: bvh.n_leaves] == internal
    assert internal[1].self_ref == NodeRef("internal", 1)
    assert leaves[2].triangle_id == 1 and leaves[2].parent == NodeRef("internal", 2)


def test_custom_layout_roundtrip_with_padding(simple):
    bvh = build(simple[0])
    specs = [(name, DEFAULT_LAYOUT.field(name).width, DEFAULT_LAYOUT.field(name).type)
             for name in [f.name for f in DEFAULT_LAYOUT.fields][::-1]]
    layout = WireNodeLayout.build(specs, padding=2)
    assert layout.words_per_node == DEFAULT_LAYOUT.words_per_node + 2
    a = decode_nodes(serialize_nodes(bvh, layout), layout)
    b = decode_nodes(serialize_nodes(bvh))
    assert len(a) == 2 * bvh.n_leaves
    assert a == b


def test_layout_errors():
    with pytest.raises(WireFormatError):
        WireNodeLayout.build([("box_min", 3, "f4"), ("box_min", 3, "f4")])
    with pytest.raises(WireFormatError):
        decode_nodes(np.zeros(DEFAULT_LAYOUT.words_per_node + 1, np.int32))
    with pytest.raises(KeyError):
        DEFAULT_LAYOUT.field("colour")


def test_dot_has_one_vertex_per_node(canopy):
    bvh = build(canopy[0])
    g, names = _dot_nodes(emit_dot(bvh))
    assert len(names) == (bvh.n_leaves - 1) + bvh.n_leaves + 1
    assert len(g.get_edges()) == 2 * (bvh.n_leaves - 1) + 1


def test_dot_flags_broken_tree():
    bvh = construct_partial(random_soup(20, seed=1), 10)
    text = emit_dot(bvh)
    pydot.graph_from_dot_data(text)
    assert "red" in text


def test_write_dot(tmp_path, simple):
    path = write_dot(build(simple[0]), tmp_path / "t.gv")
    assert path.read_text().startswith("digraph")


def test_fixture_stream_has_eight_blocks_and_root(simple):
    bvh = build(simple[0])
    nodes = decode_nodes(serialize_nodes(bvh))
    assert len(nodes) == 8
    root = nodes[1]
    assert (root.range_l, root.range_r, root.arrivals) == (0, 3, 2)


def test_zeroed_node_serializes_to_zero_words(simple):
    from lbvh_rsi.diagnostics import _node_words
    from lbvh_rsi.lbvh import NodeArray

    assert not _node_words(NodeArray.zeros(1), "null", DEFAULT_LAYOUT).any()


def test_truncated_stream_is_rejected(simple):
    stream = serialize_nodes(build(simple[0]))
    with pytest.raises(WireFormatError):
        decode_nodes(stream[:-1])


def test_half_built_stream_shows_failure_signatures():
    bvh = construct_partial(random_soup(120, seed=0), 64)
    internal = decode_nodes(serialize_nodes(bvh))[: bvh.n_leaves]
    arrivals = {d.arrivals for d in internal}
    assert {0, 1, 2} <= arrivals
    half = [d for d in internal if d.arrivals == 1]
    assert any(d.child_r.is_null or d.child_l.is_null for d in half)


def test_fixture_dot_labels(simple):
    text = emit_dot(build(simple[0]))
    assert 'i1 [label="[0,3]"' in text
    for leaf, tid in enumerate([0, 3, 1, 2]):
        assert f'l{leaf} [label="[{leaf}] {tid}"' in text


def test_single_leaf_dot():
    from lbvh_rsi.geometry import Mesh

    m = Mesh(np.float32([[0, 0, 0], [1, 0, 0], [0, 1, 0]]), [[0, 1, 2]])
    g, names = _dot_nodes(emit_dot(build(m)))
    assert sorted(names) == ["l0", "sentinel"]
    assert [(e.get_source(), e.get_destination()) for e in g.get_edges()] == [("sentinel", "l0")]

"""Small hand-built scenes used by tests, demos and the CLI.

``simple_scene`` is a unit square ``[12, 13] x [2, 3]`` split into four
triangles around its centre, lifted into a gently tilted surface:

    T0 bottom, T1 right, T2 top, T3 left

Each triangle owns its own three vertices (12 vertices total). Segments 1, 2,
4 and 7 cross T0, T1, T2 and T3 at (12.7, 2.2, 1.14), (12.9, 2.4, 1.21),
(12.6, 2.9, 1.23) and (12.2, 2.4, 1.08); the other four miss.
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, SegmentBatch

# square corners and centre with their heights
_A = (12.0, 2.0, 1.0)
_B = (13.0, 2.0, 1.2)
_C = (13.0, 3.0, 1.3)
_D = (12.0, 3.0, 1.2)
_E = (12.5, 2.5, 1.1)

SIMPLE_HITS = {
    1: (0, (12.7, 2.2, 1.14)),
    2: (1, (12.9, 2.4, 1.21)),
    4: (2, (12.6, 2.9, 1.23)),
    7: (3, (12.2, 2.4, 1.08)),
}
SIMPLE_BOOLEAN = [0, 1, 1, 0, 1, 0, 0, 1]


def _surface_triangles():
    return [(_A, _B, _E), (_B, _C, _E), (_D, _C, _E), (_A, _D, _E)]


def _mesh_from_corners(tris) -> Mesh:
    verts = np.array([v for tri in tris for v in tri], dtype=np.float32)
    return Mesh(verts, np.arange(len(verts), dtype=np.uint32).reshape(-1, 3))


def simple_segments() -> SegmentBatch:
    starts = [
        (11.6, 2.5, 0.0),
        (12.7, 2.2, 0.0),
        (12.9, 2.4, 0.0),
        (12.4, 2.6, 0.0),
        (12.6, 2.9, 0.0),
        (12.3, 2.7, 1.5),
        (13.4, 2.8, 0.0),
        (12.2, 2.4, 2.0),
    ]
    ends = [
        (11.6, 2.5, 2.0),
        (12.7, 2.2, 2.0),
        (12.9, 2.4, 2.0),
        (12.4, 2.6, 0.9),
        (12.6, 2.9, 2.0),
        (12.8, 2.3, 2.0),
        (13.4, 2.8, 2.0),
        (12.2, 2.4, 0.5),
    ]
    return SegmentBatch(np.array(starts, np.float32), np.array(ends, np.float32))


def simple_scene() -> tuple[Mesh, SegmentBatch]:
    """Four-triangle surface and eight segments."""
    return _mesh_from_corners(_surface_triangles()), simple_segments()


def canopy_scene(lift: float = 0.5) -> tuple[Mesh, SegmentBatch]:
    """The simple surface plus two patches hovering above triangles 1 and 2.

    The patches are copies of T1 and T2 raised by ``lift``. Segments 2 and 4
    of the simple scene now cross two layers each.
    """
    base = _surface_triangles()
    patches = [tuple((x, y, z + lift) for x, y, z in base[k]) for k in (1, 2)]
    return _mesh_from_corners(base + patches), simple_segments()

"""
Diagnosing a half-built tree
============================

If only some leaves climb the tree (say a launch covered 16,384 of 29,260
leaves) the result has three tell-tale signs: internal nodes reached once,
internal nodes never reached, and no root. The validator names all three,
and the DOT output paints the damaged nodes red.

    python demos/broken_tree.py && dot -Tpng broken.gv -o broken.png
"""

from lbvh_rsi.diagnostics import construct_partial, format_dump, write_dot
from lbvh_rsi.lbvh import bvh_validate
from lbvh_rsi.synthesis import PAPER_GRID, random_soup, terrain

mesh = terrain(PAPER_GRID)
report = bvh_validate(construct_partial(mesh, 16_384))
print(report.summary())
print("half-filled:", len(report.half_filled), "untouched:", len(report.untouched), "null root:", report.null_root)

# the same failure at a size that fits on screen
small = construct_partial(random_soup(12, seed=1), 6)
print(format_dump(small, nodes=range(4)))
print("wrote", write_dot(small, "broken.gv"))

# a whole tree for comparison
whole = construct_partial(random_soup(12, seed=1), 12)
print(bvh_validate(whole).summary())
print("wrote", write_dot(whole, "whole.gv"))

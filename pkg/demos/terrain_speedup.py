"""
Tree search against exhaustive search
=====================================

A synthetic terrain at 29,260 triangles, queried with short segments. The
tree prunes each segment down to about one triangle test; exhaustive search
tests all of them.

    python demos/terrain_speedup.py --rays 20000
"""

import argparse
import time

from lbvh_rsi import fixtures
from lbvh_rsi.oracle import brute_force
from lbvh_rsi.query import QueryConfig, run_pipeline
from lbvh_rsi.synthesis import PAPER_GRID, synthesize_scene

parser = argparse.ArgumentParser()
parser.add_argument("--rays", type=int, default=20_000)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

mesh, segs = synthesize_scene(args.rays, grid=PAPER_GRID, seed=args.seed)
cfg = QueryConfig("boolean")

# the first calls compile the kernels, so warm up on a tiny scene
run_pipeline(*fixtures.simple_scene(), cfg)
brute_force(*fixtures.simple_scene(), cfg)
t0 = time.perf_counter()
res, timing = run_pipeline(mesh, segs, cfg)
t_tree = time.perf_counter() - t0
print(timing.format())

t0 = time.perf_counter()
ref = brute_force(mesh, segs, cfg)
t_brute = time.perf_counter() - t0

print(f"{mesh.n_triangles} triangles, {len(segs)} segments, {res.intersects.mean():.0%} hit")
print(f"tree {t_tree:.3f} s, exhaustive {t_brute:.2f} s, {t_brute / t_tree:.0f}x faster")
print(f"triangle tests per segment: {res.mt_tests.mean():.2f} vs {mesh.n_triangles}")
print("divergent segments:", res.divergence(ref).size)

"""
Binary datasets and the command line
====================================

Datasets are four headerless little-endian files: float32 vertices, uint32
triangle indices and float32 segment endpoints. This writes one, then drives
the ``lbvh-rsi`` command over it.
"""

import tempfile
from pathlib import Path

from lbvh_rsi.cli import main
from lbvh_rsi.dataio import DatasetFiles, load_results, save_dataset
from lbvh_rsi.synthesis import synthesize_scene

root = Path(tempfile.mkdtemp())
paths = DatasetFiles.in_directory(root)
mesh, segs = synthesize_scene(5000, grid=(50, 40), seed=1)
save_dataset(mesh, segs, paths)
for p in root.iterdir():
    print(f"{p.name:16} {p.stat().st_size:8} bytes")

files = ["--vertices", str(paths.vertices), "--triangles", str(paths.triangles),
         "--from", str(paths.rays_from), "--to", str(paths.rays_to)]
out = root / "hits.bin"
main(["run", *files, "--mode", "barycentric", "--out", str(out)])
res = load_results(out, "barycentric", len(segs))
print(f"{len(res.segment_ids)} records, first at {res.points[0].tolist()}")

# both engines on the same files; exit code 0 means no segment differs
print("compare exit code:", main(["compare", *files]))

"""Command line front end.

    lbvh-rsi run --fixture simple --mode boolean
    lbvh-rsi run --synthesize 100000 --grid 111x134 --mode barycentric --out hits.bin
    lbvh-rsi compare --synthesize 10000 --seed 3
    lbvh-rsi graph --fixture canopy --graph bvh_structure.gv

Exit codes: 0 success, 1 usage, 2 data error, 3 integrity failure,
4 divergence between the BVH engine and the brute-force oracle.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings

import numpy as np

from . import fixtures
from .dataio import DatasetFiles, LoadError, load_dataset, save_results
from .diagnostics import format_dump, write_dot
from .geometry import InvalidGeometryError, surface_extent
from .lbvh import BvhIntegrityError, bvh_construct, bvh_reset, bvh_validate
from .morton import build_sorted_order
from .oracle import brute_force
from .query import MODES, QueryConfig, run_pipeline, set_workers
from .synthesis import PAPER_GRID, synthesize_scene

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTEGRITY, EXIT_DIVERGENCE = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like WxH, got {text!r}")
    if w < 2 or h < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2x2 vertices")
    return w, h


def _add_input_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("input (pick one source)")
    src.add_argument("--fixture", choices=("simple", "canopy"), help="built-in test scene")
    src.add_argument("--synthesize", type=int, metavar="N", help="generate a terrain scene with N segments")
    src.add_argument("--seed", type=int, default=0)
    src.add_argument("--grid", type=_grid, default=PAPER_GRID, metavar="WxH",
                     help="terrain vertex grid for --synthesize (default 111x134)")
    src.add_argument("--vertices")
    src.add_argument("--triangles")
    src.add_argument("--from", dest="rays_from")
    src.add_argument("--to", dest="rays_to")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--double-precision", action="store_true", help="64-bit intermediates in the predicate")
    p.add_argument("--candidate-cap", type=int, default=32)
    p.add_argument("--workers", type=int, help="kernel thread cap (default: all)")
    p.add_argument("--out", help="results file")
    p.add_argument("--examine-bvh", action="store_true", help="print the node listing")
    p.add_argument("--graph", metavar="PATH", help="write the tree as Graphviz DOT")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lbvh-rsi", description="Segment / triangle-mesh intersection with a linear BVH.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "run": "build the BVH and query every segment",
        "validate": "build the BVH and print its integrity report",
        "dump": "print every BVH node",
        "graph": "write the BVH as a DOT file",
        "oracle": "query every segment by exhaustive search",
        "compare": "run both engines and report divergent segments",
    }
    for name, text in helps.items():
        _add_input_args(sub.add_parser(name, help=text, description=text))
    return parser


def _load(args):
    sources = [args.fixture is not None, args.synthesize is not None,
               any(x is not None for x in (args.vertices, args.triangles, args.rays_from, args.rays_to))]
    if sum(sources) != 1:
        raise _UsageError("give exactly one of --fixture, --synthesize, or the four dataset paths")
    if args.fixture:
        return fixtures.simple_scene() if args.fixture == "simple" else fixtures.canopy_scene()
    if args.synthesize is not None:
        if args.synthesize < 1:
            raise _UsageError("--synthesize needs N >= 1")
        return synthesize_scene(args.synthesize, grid=args.grid, seed=args.seed)
    if None in (args.vertices, args.triangles, args.rays_from, args.rays_to):
        raise _UsageError("--vertices, --triangles, --from and --to are all required")
    return load_dataset(DatasetFiles(args.vertices, args.triangles, args.rays_from, args.rays_to))


class _UsageError(Exception):
    pass


def _config(args, mode) -> QueryConfig:
    return QueryConfig(mode=mode, high_precision=args.double_precision,
                       candidate_capacity=args.candidate_cap)


def _tree(mesh):
    return bvh_construct(bvh_reset(mesh, build_sorted_order(mesh, surface_extent(mesh))), check=False)


def _describe(result) -> str:
    n_hit = len(result.hit_segments())
    line = f"{result.n_segments} segments, {n_hit} intersections ({result.mode})"
    if result.mode == "boolean" and result.n_segments <= 16:
        line += "\n" + "  ".join(f"{i}: {int(b)}" for i, b in enumerate(result.intersects))
    elif result.mode == "barycentric" and len(result.segment_ids) <= 16:
        for sid, d, tid, p in zip(*result.barycentric()):
            line += f"\n  segment {sid}: triangle {tid}, distance {d:.6g}, point {np.round(p.astype(float), 6).tolist()}"
    elif result.mode == "intercept_count" and result.n_segments <= 16:
        line += "\n" + "  ".join(f"{i}: {int(c)}" for i, c in enumerate(result.counts))
    return line


def _run(args, mesh, segs, out) -> int:
    mode = args.mode or "boolean"
    cfg = _config(args, mode)
    if args.command == "oracle":
        t0 = time.perf_counter()
        result = brute_force(mesh, segs, cfg)
        print(_describe(result), file=out)
        print(f"brute force: {1e3 * (time.perf_counter() - t0):.3f} ms", file=out)
    else:
        try:
            result, timing = run_pipeline(mesh, segs, cfg)
        except BvhIntegrityError as exc:
            print(exc.report.summary(), file=out)
            return EXIT_INTEGRITY
        if args.examine_bvh or args.graph:
            bvh = _tree(mesh)
            if args.examine_bvh:
                print(format_dump(bvh), file=out)
            if args.graph:
                print(f"wrote {write_dot(bvh, args.graph)}", file=out)
        print(_describe(result), file=out)
        if args.out:
            with timing.stage("IO"):
                save_results(result, mode, args.out)
        print(timing.format(), file=out)
        return EXIT_OK
    if args.out:
        save_results(result, mode, args.out)
    return EXIT_OK


def _compare(args, mesh, segs, out) -> int:
    modes = [args.mode] if args.mode else list(MODES)
    diverged = False
    for mode in modes:
        cfg = _config(args, mode)
        ours, _ = run_pipeline(mesh, segs, cfg)
        ref = brute_force(mesh, segs, cfg)
        bad = ours.divergence(ref)
        if len(bad):
            diverged = True
            shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
            print(f"{mode}: {len(bad)} divergent segments: {shown}", file=out)
        else:
            print(f"{mode}: identical ({len(segs)} segments)", file=out)
    return EXIT_DIVERGENCE if diverged else EXIT_OK


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    parser = build_parser()
    args = parser.parse_args(argv)
    set_workers(args.workers)
    try:
        mesh, segs = _load(args)
    except _UsageError as exc:
        print(f"lbvh-rsi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadError, InvalidGeometryError, OSError) as exc:
        print(f"lbvh-rsi: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if mesh.n_triangles == 0:
        print("lbvh-rsi: data error: mesh has no triangles", file=sys.stderr)
        return EXIT_DATA

    if args.command in ("run", "oracle"):
        return _run(args, mesh, segs, out)
    if args.command == "compare":
        return _compare(args, mesh, segs, out)

    bvh = _tree(mesh)
    report = bvh_validate(bvh)
    if args.command == "validate":
        print(report.summary(), file=out)
    elif args.command == "dump":
        print(format_dump(bvh), file=out)
    elif args.command == "graph":
        print(f"wrote {write_dot(bvh, args.graph or 'bvh_structure.gv')}", file=out)
    return EXIT_OK if report.ok else EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())

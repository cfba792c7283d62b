"""Headerless little-endian binary files for meshes, segments and results.

=============  ==========================================================
file           layout
=============  ==========================================================
vertices       float32 x, y, z per vertex (12 bytes each)
triangles      uint32 i0, i1, i2 per triangle (12 bytes each)
rays from/to   float32 x, y, z per segment endpoint (12 bytes each)
results        boolean: uint8 0/1 per segment
               intercept_count: uint32 per segment
               barycentric: 24-byte records ``segment id (uint32),
               distance (float32), triangle id (uint32), point (3 x float32)``
=============  ==========================================================

Element counts are inferred from file sizes. Every index field is 32 bits
wide (:data:`~lbvh_rsi.geometry.INDEX_DTYPE`).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import INDEX_DTYPE, REAL_DTYPE, InvalidGeometryError, Mesh, SegmentBatch
from .query import MODES, HitResult

POINT_DTYPE = np.dtype((REAL_DTYPE, (3,)))
TRIPLET_DTYPE = np.dtype((INDEX_DTYPE, (3,)))
COUNT_DTYPE = INDEX_DTYPE
BARYCENTRIC_RECORD = np.dtype(
    [("segment_id", INDEX_DTYPE), ("distance", REAL_DTYPE),
     ("triangle_id", INDEX_DTYPE), ("point", REAL_DTYPE, (3,))]
)


class LoadError(Exception):
    """Base class for dataset problems."""


class FileSizeError(LoadError):
    pass


class IndexRangeError(LoadError):
    pass


class NonFiniteError(LoadError):
    pass


@dataclass(frozen=True)
class DatasetFiles:
    vertices: Path
    triangles: Path
    rays_from: Path
    rays_to: Path
    results: Path | None = None

    @classmethod
    def in_directory(cls, root, results: str | None = "results.bin") -> "DatasetFiles":
        root = Path(root)
        return cls(root / "vertices.bin", root / "triangles.bin", root / "rays_from.bin",
                   root / "rays_to.bin", root / results if results else None)


def _read(path, dtype: np.dtype, what: str) -> np.ndarray:
    path = Path(path)
    size = os.path.getsize(path)
    if size % dtype.itemsize:
        raise FileSizeError(f"{what} file {path} has {size} bytes, not a multiple of {dtype.itemsize}")
    return np.fromfile(path, dtype=dtype)


def load_dataset(paths: DatasetFiles) -> tuple[Mesh, SegmentBatch]:
    verts = _read(paths.vertices, POINT_DTYPE, "vertices")
    tris = _read(paths.triangles, TRIPLET_DTYPE, "triangles")
    starts = _read(paths.rays_from, POINT_DTYPE, "rays-from")
    ends = _read(paths.rays_to, POINT_DTYPE, "rays-to")
    if starts.shape != ends.shape:
        raise FileSizeError(f"rays-from has {len(starts)} points but rays-to has {len(ends)}")
    for name, arr in (("vertices", verts), ("rays-from", starts), ("rays-to", ends)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{name} contains NaN or Inf")
    if tris.size and int(tris.max()) >= len(verts):
        bad = int(np.flatnonzero((tris >= len(verts)).any(axis=1))[0])
        raise IndexRangeError(
            f"triangle {bad} references vertex {int(tris[bad].max())} but only {len(verts)} vertices exist"
        )
    try:
        return Mesh(verts, tris), SegmentBatch(starts, ends)
    except InvalidGeometryError as exc:
        raise LoadError(str(exc)) from exc


def save_dataset(mesh: Mesh, segments: SegmentBatch, paths: DatasetFiles) -> None:
    for path in (paths.vertices, paths.triangles, paths.rays_from, paths.rays_to):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    mesh.vertices.astype(REAL_DTYPE).tofile(paths.vertices)
    mesh.triangles.astype(INDEX_DTYPE).tofile(paths.triangles)
    segments.starts.astype(REAL_DTYPE).tofile(paths.rays_from)
    segments.ends.astype(REAL_DTYPE).tofile(paths.rays_to)


def result_bytes(result: HitResult) -> bytes:
    if result.mode == "boolean":
        return np.asarray(result.intersects, np.uint8).tobytes()
    if result.mode == "intercept_count":
        return np.asarray(result.counts).astype(COUNT_DTYPE).tobytes()
    rec = np.zeros(len(result.segment_ids), BARYCENTRIC_RECORD)
    rec["segment_id"] = result.segment_ids
    rec["distance"] = result.distances
    rec["triangle_id"] = result.triangle_ids
    rec["point"] = result.points
    return rec.tobytes()


def save_results(result: HitResult, mode: str, path) -> None:
    if result.mode != mode:
        raise ValueError(f"result is in {result.mode!r} mode, asked to save as {mode!r}")
    Path(path).write_bytes(result_bytes(result))


def load_results(path, mode: str, n_segments: int | None = None) -> HitResult:
    """Read a results file back; ``n_segments`` is needed for barycentric mode."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    raw = Path(path).read_bytes()
    if mode == "boolean":
        flags = np.frombuffer(raw, np.uint8)
        return HitResult(mode, len(flags), intersects=flags.astype(bool))
    if mode == "intercept_count":
        if len(raw) % COUNT_DTYPE.itemsize:
            raise FileSizeError("count file size is not a multiple of 4")
        counts = np.frombuffer(raw, COUNT_DTYPE).astype(np.int32)
        return HitResult(mode, len(counts), counts=counts)
    if len(raw) % BARYCENTRIC_RECORD.itemsize:
        raise FileSizeError(f"record file size is not a multiple of {BARYCENTRIC_RECORD.itemsize}")
    rec = np.frombuffer(raw, BARYCENTRIC_RECORD)
    n = n_segments if n_segments is not None else (int(rec["segment_id"].max()) + 1 if len(rec) else 0)
    return HitResult(mode, n, segment_ids=rec["segment_id"].copy(), distances=rec["distance"].copy(),
                     triangle_ids=rec["triangle_id"].copy(), points=rec["point"].copy())

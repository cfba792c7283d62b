import numpy as np
import pytest

from lbvh_rsi.dataio import (
    BARYCENTRIC_RECORD,
    DatasetFiles,
    FileSizeError,
    IndexRangeError,
    NonFiniteError,
    load_dataset,
    load_results,
    result_bytes,
    save_dataset,
    save_results,
)
from lbvh_rsi.geometry import INDEX_DTYPE
from lbvh_rsi.oracle import brute_force
from lbvh_rsi.query import MODES, QueryConfig


@pytest.fixture
def files(tmp_path, simple):
    paths = DatasetFiles.in_directory(tmp_path)
    save_dataset(*simple, paths)
    return paths


def test_dataset_roundtrip(files, simple):
    mesh, segs = load_dataset(files)
    np.testing.assert_array_equal(mesh.vertices, simple[0].vertices)
    np.testing.assert_array_equal(mesh.triangles, simple[0].triangles)
    np.testing.assert_array_equal(segs.ends, simple[1].ends)
    assert mesh.vertices.shape == (12, 3) and segs.starts.shape == (8, 3)
    assert files.vertices.stat().st_size == 12 * 12


def test_truncated_file_is_rejected(files):
    files.vertices.write_bytes(files.vertices.read_bytes()[:-2])
    with pytest.raises(FileSizeError):
        load_dataset(files)


def test_mismatched_ray_files(files):
    files.rays_to.write_bytes(files.rays_to.read_bytes()[:-12])
    with pytest.raises(FileSizeError):
        load_dataset(files)


def test_bad_vertex_index(files):
    tris = np.fromfile(files.triangles, INDEX_DTYPE)
    tris[4] = 99
    tris.tofile(files.triangles)
    with pytest.raises(IndexRangeError, match="triangle 1"):
        load_dataset(files)


def test_nan_vertex(files):
    v = np.fromfile(files.vertices, np.float32)
    v[5] = np.nan
    v.tofile(files.vertices)
    with pytest.raises(NonFiniteError):
        load_dataset(files)


def test_record_layout():
    assert BARYCENTRIC_RECORD.itemsize == 24
    assert [BARYCENTRIC_RECORD.fields[k][1] for k in ("segment_id", "distance", "triangle_id", "point")] == [0, 4, 8, 12]


@pytest.mark.parametrize("mode", MODES)
def test_results_roundtrip(tmp_path, simple, mode):
    mesh, segs = simple
    res = brute_force(mesh, segs, QueryConfig(mode))
    path = tmp_path / f"{mode}.bin"
    save_results(res, mode, path)
    back = load_results(path, mode, n_segments=len(segs))
    assert back.divergence(res).size == 0
    expected = {"boolean": 8, "intercept_count": 32, "barycentric": 4 * 24}[mode]
    assert path.stat().st_size == expected == len(result_bytes(res))


def test_save_results_checks_mode(tmp_path, simple):
    res = brute_force(*simple, QueryConfig("boolean"))
    with pytest.raises(ValueError):
        save_results(res, "barycentric", tmp_path / "x.bin")
    with pytest.raises(ValueError):
        load_results(tmp_path / "x.bin", "nearest")


def test_index_fields_are_32_bit(tmp_path, simple):
    mesh, segs = simple
    save_dataset(mesh, segs, DatasetFiles.in_directory(tmp_path))
    assert (tmp_path / "triangles.bin").stat().st_size == 4 * 3 * 4
    for name in ("segment_id", "triangle_id"):
        assert BARYCENTRIC_RECORD.fields[name][0] == INDEX_DTYPE
    res = brute_force(mesh, segs, QueryConfig("barycentric"))
    assert res.segment_ids.dtype == INDEX_DTYPE and res.triangle_ids.dtype == INDEX_DTYPE


def test_fixture_boolean_bytes(simple):
    res = brute_force(*simple, QueryConfig("boolean"))
    assert result_bytes(res) == bytes([0, 1, 1, 0, 1, 0, 0, 1])


def test_empty_batch_writes_empty_file(tmp_path, simple):
    from lbvh_rsi.geometry import SegmentBatch

    empty = SegmentBatch(np.zeros((0, 3)), np.zeros((0, 3)))
    for mode in MODES:
        path = tmp_path / mode
        save_results(brute_force(simple[0], empty, QueryConfig(mode)), mode, path)
        assert path.stat().st_size == 0

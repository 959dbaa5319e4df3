import numpy as np
import pytest

from filamentqc.cloud import INTENSITY, RGB, SIGNED_DISTANCE, ColorAttr, PointCloud
from filamentqc.errors import DataError
from filamentqc.io_ply import (
    PLY_ASCII,
    PLY_BINARY_LE,
    XYZ_TEXT,
    load_point_cloud,
    load_point_cloud_with_labels,
    save_point_cloud,
)


def test_three_point_ascii_ply_rgb(tmp_path):
    path = tmp_path / "tri.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
        "0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0 0 0 255\n")
    cloud = load_point_cloud(path, PLY_ASCII)
    assert len(cloud) == 3
    assert cloud.colors.kind == RGB
    assert np.array_equal(cloud.colors.values[1], [0, 255, 0])
    assert np.array_equal(cloud.points[1], [1, 0, 0])


def test_xyz_scalar_normalized(tmp_path):
    path = tmp_path / "pts.xyz"
    path.write_text("# comment line\n0 0 0 10\n1 0 0 20\n2 0 0 30\n")
    cloud = load_point_cloud(path, XYZ_TEXT)
    assert cloud.colors.kind == INTENSITY
    assert np.allclose(cloud.colors.values, [0.0, 0.5, 1.0])


def test_xyz_constant_scalar_degenerates_to_half(tmp_path):
    path = tmp_path / "flat.xyz"
    path.write_text("0 0 0 7\n1 0 0 7\n")
    cloud = load_point_cloud(path, XYZ_TEXT)
    assert np.array_equal(cloud.colors.values, [0.5, 0.5])


def test_binary_roundtrip_matches_ascii_reencoding(tmp_path, rng):
    n = 100_000
    pts = rng.normal(size=(n, 3))
    cloud = PointCloud(pts, ColorAttr(INTENSITY, rng.random(n)))
    bin_path = tmp_path / "big.ply"
    save_point_cloud(cloud, bin_path, PLY_BINARY_LE)
    loaded = load_point_cloud(bin_path, PLY_BINARY_LE)
    assert np.array_equal(loaded.points, cloud.points)
    assert np.array_equal(loaded.colors.values, cloud.colors.values)

    ascii_path = tmp_path / "big_ascii.ply"
    save_point_cloud(loaded, ascii_path, PLY_ASCII)
    reloaded = load_point_cloud(ascii_path, PLY_ASCII)
    # 17 significant digits round-trip float64 exactly
    assert np.array_equal(reloaded.points, cloud.points)
    assert np.array_equal(reloaded.colors.values, cloud.colors.values)


def test_binary_reexport_is_byte_stable(tmp_path, rng):
    pts = rng.normal(size=(500, 3))
    cloud = PointCloud(pts, ColorAttr(SIGNED_DISTANCE, rng.normal(size=500)))
    a = tmp_path / "a.ply"
    b = tmp_path / "b.ply"
    save_point_cloud(cloud, a, PLY_BINARY_LE)
    save_point_cloud(load_point_cloud(a, PLY_BINARY_LE), b, PLY_BINARY_LE)
    assert a.read_bytes() == b.read_bytes()


def test_labels_roundtrip(tmp_path, rng):
    pts = rng.normal(size=(20, 3))
    cloud = PointCloud(pts, ColorAttr(INTENSITY, rng.random(20)))
    labels = rng.integers(0, 5, size=20)
    path = tmp_path / "lab.ply"
    save_point_cloud(cloud, path, PLY_BINARY_LE, labels=labels)
    loaded, got = load_point_cloud_with_labels(path, PLY_BINARY_LE)
    assert np.array_equal(got, labels)
    assert np.array_equal(loaded.points, cloud.points)


def test_rgb_roundtrip_both_encodings(tmp_path, rng):
    pts = rng.normal(size=(64, 3))
    rgb = rng.integers(0, 256, size=(64, 3), dtype=np.uint8)
    cloud = PointCloud(pts, ColorAttr(RGB, rgb))
    for fmt in (PLY_ASCII, PLY_BINARY_LE):
        path = tmp_path / f"c_{fmt}.ply"
        save_point_cloud(cloud, path, fmt)
        loaded = load_point_cloud(path, fmt)
        assert np.array_equal(loaded.points, cloud.points)
        assert np.array_equal(loaded.colors.values, rgb)


def test_malformed_header_errors_name_line(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("ply\nformat ascii 1.0\nelement vertex 1\n"
                    "property float x\nproperty float y\nproperty float z\n"
                    "property float nx\nend_header\n0 0 0 0\n")
    with pytest.raises(DataError, match="nx"):
        load_point_cloud(path, PLY_ASCII)


def test_attribute_count_mismatch_names_line(tmp_path):
    path = tmp_path / "short.ply"
    path.write_text("ply\nformat ascii 1.0\nelement vertex 2\n"
                    "property float x\nproperty float y\nproperty float z\n"
                    "end_header\n0 0 0\n1 1\n")
    with pytest.raises(DataError, match=r":9"):
        load_point_cloud(path, PLY_ASCII)


def test_nonfinite_coordinate_rejected(tmp_path):
    path = tmp_path / "nan.xyz"
    path.write_text("0 0 0\n1 nan 0\n")
    with pytest.raises(DataError, match=":2"):
        load_point_cloud(path, XYZ_TEXT)


def test_missing_file_named(tmp_path):
    with pytest.raises(DataError, match="nope.ply"):
        load_point_cloud(tmp_path / "nope.ply", PLY_ASCII)


def test_truncated_binary_payload(tmp_path, rng):
    pts = rng.normal(size=(10, 3))
    cloud = PointCloud(pts, ColorAttr(INTENSITY, rng.random(10)))
    path = tmp_path / "trunc.ply"
    save_point_cloud(cloud, path, PLY_BINARY_LE)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(DataError, match="truncated"):
        load_point_cloud(path, PLY_BINARY_LE)


def test_format_mismatch_detected(tmp_path, rng):
    pts = rng.normal(size=(4, 3))
    cloud = PointCloud(pts, ColorAttr(INTENSITY, rng.random(4)))
    path = tmp_path / "bin.ply"
    save_point_cloud(cloud, path, PLY_BINARY_LE)
    with pytest.raises(DataError, match="expected"):
        load_point_cloud(path, PLY_ASCII)

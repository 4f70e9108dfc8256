"""Ingestion, pair construction, dataset splits."""

import struct

import numpy as np
import pytest

from lidarsr.datapipe import ingest_bin, make_pair, split_dataset, synthesize_dataset
from lidarsr.errors import EmptyDataset, MalformedFile
from lidarsr.geometry import build_sensor
from lidarsr.simulate import random_scene, simulate_scene


def write_bin(path, points):
    with open(path, "wb") as f:
        for rec in points:
            f.write(struct.pack("<ffff", *rec))


def test_ingest_single_record(tmp_path):
    g = build_sensor(np.linspace(-0.2, 0.1, 4), 16, 100.0)
    path = tmp_path / "scan.bin"
    write_bin(path, [(10.0, 0.0, 0.0, 0.5)])
    img = ingest_bin(path, g)
    assert img.valid_count() == 1
    assert img.ranges[2, 8] == pytest.approx(10.0, rel=1e-6)


def test_ingest_empty_file(tmp_path, small_geometry):
    path = tmp_path / "scan.bin"
    path.write_bytes(b"")
    img = ingest_bin(path, small_geometry)
    assert img.valid_count() == 0


def test_ingest_rejects_misaligned_file(tmp_path, small_geometry):
    path = tmp_path / "scan.bin"
    path.write_bytes(b"\x00" * 17)
    with pytest.raises(MalformedFile):
        ingest_bin(path, small_geometry)


def test_ingest_skips_origin_padding(tmp_path):
    g = build_sensor(np.linspace(-0.2, 0.1, 4), 16, 100.0)
    path = tmp_path / "scan.bin"
    write_bin(path, [(0.0, 0.0, 0.0, 0.0), (10.0, 0.0, 0.0, 0.9)])
    img = ingest_bin(path, g)
    assert img.valid_count() == 1


def test_ingest_discards_reflectance(tmp_path):
    g = build_sensor(np.linspace(-0.2, 0.1, 4), 16, 100.0)
    path = tmp_path / "scan.bin"
    write_bin(path, [(10.0, 0.0, 0.0, 0.1)])
    a = ingest_bin(path, g)
    write_bin(path, [(10.0, 0.0, 0.0, 0.9)])
    b = ingest_bin(path, g)
    np.testing.assert_array_equal(a.ranges, b.ranges)


def test_make_pair_shapes(desk_geometry):
    high = simulate_scene(random_scene(0), desk_geometry)
    low, target = make_pair(high)
    assert low.shape == (16, 128)
    assert target is high


def test_make_pair_rows_match_even_rows(desk_geometry):
    high = simulate_scene(random_scene(1), desk_geometry)
    low, _ = make_pair(high)
    np.testing.assert_array_equal(low.ranges, high.ranges[0::2])
    np.testing.assert_array_equal(low.valid, high.valid[0::2])


def test_make_pair_no_leakage(desk_geometry):
    """Input rows and predicted-only rows are disjoint by parity."""
    high = simulate_scene(random_scene(2), desk_geometry)
    low, _ = make_pair(high)
    input_rows = set(range(0, 32, 2))
    predicted_only = set(range(32)) - input_rows
    assert input_rows & predicted_only == set()
    np.testing.assert_array_equal(low.geometry.elevations,
                                  desk_geometry.elevations[sorted(input_rows)])


def test_make_pair_cascade(rng):
    g = build_sensor(np.linspace(-0.45, 0.05, 64), 64, 100.0)
    high = simulate_scene(random_scene(3), g)
    low1, _ = make_pair(high)
    low2, _ = make_pair(low1)
    assert low2.shape == (16, 64) and low1.shape == (32, 64)


def test_synthesize_dataset_deterministic(small_geometry):
    a = synthesize_dataset(small_geometry, [5, 6], dropout=0.1)
    b = synthesize_dataset(small_geometry, [5, 6], dropout=0.1)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.ranges, y.ranges)
        np.testing.assert_array_equal(x.valid, y.valid)


def test_split_fractions():
    frames = list(range(100))
    train, val, test = split_dataset(frames)
    assert (len(train), len(val), len(test)) == (62, 13, 25)
    assert train + val + test == frames


def test_split_validates_fractions():
    with pytest.raises(ValueError):
        split_dataset([1, 2, 3], (0.5, 0.2, 0.2))
    with pytest.raises(EmptyDataset):
        split_dataset([], (0.62, 0.13, 0.25))

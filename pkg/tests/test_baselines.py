"""Classical interpolation baselines on masked distance images."""

import numpy as np
import pytest

from lidarsr.baselines import doubled_elevations, interpolate
from lidarsr.errors import TooFewRows
from lidarsr.geometry import DistanceImage, build_sensor


def column_image(values, valid=None, w=8, max_range=100.0):
    """One value per row, broadcast across columns."""
    values = np.asarray(values, dtype=np.float64)
    l = values.size
    g = build_sensor(np.linspace(-0.3, 0.0, l), w, max_range)
    ranges = np.repeat(values[:, None], w, axis=1)
    if valid is None:
        v = np.ones((l, w), bool)
    else:
        v = np.repeat(np.asarray(valid, bool)[:, None], w, axis=1)
    return DistanceImage(ranges=np.where(v, ranges, 0.0), valid=v, geometry=g)


def test_bilinear_midpoint():
    img = column_image([2.0, 4.0])
    out = interpolate(img, "bilinear")
    assert out.shape[0] == 4
    np.testing.assert_array_equal(out.ranges[1], np.full(8, 3.0))


def test_nearest_copies_upper_row():
    img = column_image([2.0, 4.0])
    out = interpolate(img, "nearest")
    np.testing.assert_array_equal(out.ranges[1], np.full(8, 2.0))  # tie rule
    np.testing.assert_array_equal(out.ranges[3], np.full(8, 4.0))


def test_source_rows_preserved_bit_exactly(rng):
    g = build_sensor(np.linspace(-0.4, 0.0, 8), 16, 100.0)
    valid = rng.random((8, 16)) < 0.8
    ranges = np.where(valid, rng.uniform(1.0, 90.0, (8, 16)), 0.0)
    img = DistanceImage(ranges=ranges, valid=valid, geometry=g)
    for method in ("bilinear", "bicubic", "nearest"):
        out = interpolate(img, method)
        np.testing.assert_array_equal(out.ranges[0::2], img.ranges)
        np.testing.assert_array_equal(out.valid[0::2], img.valid)


def test_bilinear_no_overshoot(rng):
    g = build_sensor(np.linspace(-0.4, 0.0, 8), 16, 100.0)
    ranges = rng.uniform(1.0, 90.0, (8, 16))
    img = DistanceImage(ranges=ranges, valid=np.ones((8, 16), bool), geometry=g)
    out = interpolate(img, "bilinear")
    lo = np.minimum(ranges[:-1], ranges[1:])
    hi = np.maximum(ranges[:-1], ranges[1:])
    ins = out.ranges[1:-1:2]
    assert (ins >= lo - 1e-12).all() and (ins <= hi + 1e-12).all()
    # nearest trivially stays within support values too
    near = interpolate(img, "nearest").ranges[1:-1:2]
    assert (near >= lo - 1e-12).all() and (near <= hi + 1e-12).all()


def test_bicubic_catmull_rom_weights():
    img = column_image([2.0, 4.0, 6.0, 10.0])
    out = interpolate(img, "bicubic")
    # Catmull-Rom at t=1/2 over taps (2,4,6,10): (-2+9*4+9*6-10)/16 = 4.875
    assert out.ranges[3, 0] == pytest.approx((-2.0 + 36.0 + 54.0 - 10.0) / 16.0)
    # boundary rows clamp the outer tap
    assert out.ranges[1, 0] == pytest.approx((-2.0 + 18.0 + 36.0 - 6.0) / 16.0)


def test_bicubic_can_overshoot():
    img = column_image([1.0, 5.0, 5.0, 1.0])
    out = interpolate(img, "bicubic")
    ins = out.ranges[3, 0]  # between the two 5s: (-1 + 45 + 45 - 1)/16 = 5.5
    assert ins == pytest.approx(5.5)
    assert ins > 5.0  # exceeds both supports


def test_missing_support_masks_inserted_cell():
    img = column_image([2.0, 4.0, 6.0, 8.0], valid=[True, False, True, True])
    out = interpolate(img, "bilinear")
    assert not out.valid[1].any()   # support rows 0,1 include a missing cell
    assert not out.valid[3].any()   # support rows 1,2
    assert out.valid[5].all()       # support rows 2,3 both valid
    near = interpolate(img, "nearest")
    assert near.valid[1].all()      # copies row 0 (valid)
    assert not near.valid[3].any()  # copies row 1 (missing)


def test_boundary_row_replicates_last_source():
    img = column_image([2.0, 4.0, 6.0, 8.0])
    for method in ("bilinear", "bicubic"):
        out = interpolate(img, method)
        np.testing.assert_array_equal(out.ranges[-1], img.ranges[-1])


def test_too_few_rows():
    img = column_image([2.0, 4.0])
    with pytest.raises(TooFewRows):
        interpolate(img, "bicubic")
    g = build_sensor(np.linspace(-0.1, 0.0, 2), 8, 100.0)
    one_row = DistanceImage(ranges=np.ones((2, 8)), valid=np.ones((2, 8), bool),
                            geometry=g)
    # decimating to one row is impossible anyway; fake it via slicing geometry
    assert interpolate(one_row, "bilinear").shape[0] == 4


def test_linear_ramp_exact_on_interior():
    rows = np.linspace(10.0, 24.0, 8)  # linear in row index
    img = column_image(rows)
    out = interpolate(img, "bilinear")
    expect = np.linspace(10.0, 24.0, 15)  # midpoints fall on the line
    np.testing.assert_allclose(out.ranges[:-1, 0], expect, atol=1e-12)
    # the replicated boundary row is the one deviation
    assert out.ranges[-1, 0] == rows[-1]


def test_doubled_elevations_monotone():
    elev = np.array([-0.4, -0.25, -0.1, -0.02])
    dbl = doubled_elevations(elev)
    assert dbl.size == 8
    np.testing.assert_array_equal(dbl[0::2], elev)
    assert (np.diff(dbl) > 0).all()


def test_unknown_method():
    img = column_image([2.0, 4.0])
    with pytest.raises(ValueError):
        interpolate(img, "lanczos")

"""Classical vertical interpolation baselines on distance images.

Output row 2i copies input row i bit-exactly; inserted rows interpolate per
column using valid cells only. An inserted cell whose vertical support
contains a missing measurement is itself missing, so the baselines never
fabricate ranges from the d*=0 sentinel. The bottom boundary row replicates
the nearest source row.
"""

from __future__ import annotations

import numpy as np

from .errors import TooFewRows
from .geometry import DistanceImage, SensorGeometry

METHODS = ("bilinear", "bicubic", "nearest")

# Catmull-Rom (a = -0.5) weights at t = 1/2 over 4 vertical taps.
_CR_W = np.array([-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0])


def doubled_elevations(elevations: np.ndarray) -> np.ndarray:
    """Midpoint-inserted table of length 2L; the last row extrapolates."""
    elevations = np.asarray(elevations, dtype=np.float64)
    l = elevations.size
    out = np.empty(2 * l)
    out[0::2] = elevations
    out[1:-1:2] = 0.5 * (elevations[:-1] + elevations[1:])
    out[-1] = elevations[-1] + 0.5 * (elevations[-1] - elevations[-2])
    return out


def _upsampled_geometry(low: DistanceImage, geometry: SensorGeometry | None):
    if geometry is not None:
        return geometry
    return SensorGeometry(elevations=doubled_elevations(low.geometry.elevations),
                          azimuths=low.geometry.azimuths,
                          max_range=low.geometry.max_range)


def interpolate(low: DistanceImage, method: str,
                geometry: SensorGeometry | None = None) -> DistanceImage:
    """Double the row count of a distance image with a classical filter.

    ``geometry`` optionally supplies the true high-resolution grid; by
    default elevations are midpoint-inserted. Values are clamped to
    max_range; nonpositive results (bicubic overshoot) become missing.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    l, w = low.shape
    if l < 2 or (method == "bicubic" and l < 4):
        raise TooFewRows(f"{method} needs at least "
                         f"{4 if method == 'bicubic' else 2} rows, got {l}")

    src = low.ranges
    ok = low.valid
    out = np.zeros((2 * l, w))
    out_ok = np.zeros((2 * l, w), bool)
    out[0::2] = src
    out_ok[0::2] = ok

    if method == "nearest":
        # Inserted row 2i+1 is equidistant from rows i and i+1; the tie
        # resolves to the upper (lower-index) row.
        out[1::2] = src
        out_ok[1::2] = ok
    elif method == "bilinear":
        a, b = src[:-1], src[1:]
        both = ok[:-1] & ok[1:]
        out[1:-1:2] = np.where(both, 0.5 * (a + b), 0.0)
        out_ok[1:-1:2] = both
        out[-1] = src[-1]
        out_ok[-1] = ok[-1]
    else:  # bicubic
        idx = np.arange(l - 1)
        taps = np.stack([np.clip(idx - 1, 0, l - 1), idx, idx + 1,
                         np.clip(idx + 2, 0, l - 1)])
        vals = src[taps]
        supp = ok[taps].all(axis=0)
        interp = np.einsum("t,trw->rw", _CR_W, vals)
        out[1:-1:2] = np.where(supp, interp, 0.0)
        out_ok[1:-1:2] = supp
        out[-1] = src[-1]
        out_ok[-1] = ok[-1]

    max_range = low.geometry.max_range
    out = np.minimum(out, max_range)
    out_ok &= out > 0
    out[~out_ok] = 0.0
    return DistanceImage(ranges=out, valid=out_ok,
                         geometry=_upsampled_geometry(low, geometry))

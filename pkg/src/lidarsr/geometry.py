"""Cylindrical projection between 3D point clouds and distance images.

A scan grid is defined by an elevation table (one entry per layer) and a
uniform azimuth table. Distance images store ranges in meters with an
explicit boolean validity mask in memory; on disk (LDI files) missing cells
are NaN. The network-input sentinel 0.0 is applied only by
``to_network_raster``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadRange,
    CorruptFile,
    EmptyGeometry,
    GeometryError,
    NonMonotoneElevations,
    OddLayerCount,
    OriginPoint,
)

LDI_MAGIC = b"LDI1"
IGNORE_ID = 255
NUM_CLASSES = 13

# Validity tolerates r == max_range plus round-trip float noise.
_RANGE_SLACK = 1.0 + 1e-9


def _readonly(arr):
    arr = np.array(arr, copy=True)  # never freeze a caller-owned buffer
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SensorGeometry:
    """Scan grid: per-layer elevations, uniform azimuths, max range (meters)."""

    elevations: np.ndarray
    azimuths: np.ndarray
    max_range: float

    def __post_init__(self):
        elev = _readonly(np.asarray(self.elevations, dtype=np.float64))
        azim = _readonly(np.asarray(self.azimuths, dtype=np.float64))
        object.__setattr__(self, "elevations", elev)
        object.__setattr__(self, "azimuths", azim)
        if elev.ndim != 1 or elev.size < 2:
            raise NonMonotoneElevations("need at least 2 elevation entries")
        d = np.diff(elev)
        if not ((d > 0).all() or (d < 0).all()):
            raise NonMonotoneElevations("elevations must be strictly monotone")
        if azim.ndim != 1 or azim.size < 2:
            raise EmptyGeometry("need at least 2 azimuth entries")
        da = np.diff(azim)
        if not (da > 0).all():
            raise GeometryError("azimuths must be strictly increasing")
        if np.ptp(da) > 1e-9:
            raise GeometryError("azimuth spacing must be uniform within 1e-9 rad")
        if azim[-1] - azim[0] >= 2.0 * np.pi:
            raise GeometryError("azimuth span must be less than 2*pi")
        if not (float(self.max_range) > 0.0):
            raise BadRange(f"max_range must be positive, got {self.max_range}")
        object.__setattr__(self, "max_range", float(self.max_range))

    @property
    def layer_count(self):
        return self.elevations.size

    @property
    def azimuth_count(self):
        return self.azimuths.size

    @property
    def shape(self):
        return (self.elevations.size, self.azimuths.size)


def build_sensor(elevations, azimuth_count, max_range):
    """Build a grid with the uniform azimuth table phi_j = -pi + 2*pi*j/W.

    Elevations must be strictly monotone with an even count of at least 2;
    non-equidistant tables (denser near the horizon) are legal.
    """
    elev = np.asarray(elevations, dtype=np.float64)
    if elev.ndim != 1 or elev.size < 2:
        raise NonMonotoneElevations("need at least 2 elevation entries")
    if elev.size % 2 != 0:
        raise OddLayerCount(f"layer count must be even, got {elev.size}")
    w = int(azimuth_count)
    if w < 4:
        raise EmptyGeometry(f"azimuth_count must be >= 4, got {azimuth_count}")
    azim = -np.pi + 2.0 * np.pi * np.arange(w, dtype=np.float64) / w
    return SensorGeometry(elevations=elev, azimuths=azim, max_range=max_range)


@dataclass(frozen=True, eq=False)
class DistanceImage:
    """L x W raster of ranges plus validity mask and optional class labels."""

    ranges: np.ndarray
    valid: np.ndarray
    geometry: SensorGeometry
    labels: np.ndarray | None = None

    def __post_init__(self):
        ranges = _readonly(np.asarray(self.ranges, dtype=np.float64))
        valid = _readonly(np.asarray(self.valid, dtype=bool))
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "valid", valid)
        shape = self.geometry.shape
        if ranges.shape != shape or valid.shape != shape:
            raise GeometryError(
                f"raster shape {ranges.shape} does not match geometry {shape}")
        r = ranges[valid]
        if r.size and (not np.isfinite(r).all() or (r <= 0).any()
                       or (r > self.geometry.max_range * _RANGE_SLACK).any()):
            raise BadRange("valid cells must satisfy 0 < range <= max_range")
        if self.labels is not None:
            labels = _readonly(np.asarray(self.labels, dtype=np.uint8))
            object.__setattr__(self, "labels", labels)
            if labels.shape != shape:
                raise GeometryError(
                    f"label shape {labels.shape} does not match geometry {shape}")
            bad = (labels >= NUM_CLASSES) & (labels != IGNORE_ID)
            if bad.any():
                raise GeometryError(
                    f"labels must be in [0, {NUM_CLASSES}) or {IGNORE_ID}")

    @property
    def shape(self):
        return self.ranges.shape

    def valid_count(self):
        return int(self.valid.sum())


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Cartesian points with optional grid provenance and class ids."""

    points: np.ndarray
    rows: np.ndarray | None = None
    cols: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = _readonly(np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "points", pts)
        n = pts.shape[0]
        for name in ("rows", "cols", "labels"):
            v = getattr(self, name)
            if v is None:
                continue
            v = _readonly(np.asarray(v, dtype=np.int64 if name != "labels" else np.uint8))
            if v.shape != (n,):
                raise GeometryError(f"{name} must have one entry per point")
            object.__setattr__(self, name, v)
        if (self.rows is None) != (self.cols is None):
            raise GeometryError("rows and cols must be given together")
        if self.rows is not None and n:
            cells = self.rows.astype(np.int64) << 32 | self.cols.astype(np.int64)
            if np.unique(cells).size != n:
                raise GeometryError("provenance indices must be unique")

    def __len__(self):
        return self.points.shape[0]


def project(cloud: PointCloud, geometry: SensorGeometry) -> DistanceImage:
    """Bin points into the nearest (elevation, azimuth) cell; nearer point wins.

    Points beyond max_range or outside the elevation envelope (edge
    half-spacing beyond the first/last layer) are dropped silently. Azimuth
    ties break toward the lower bin index. The result is independent of the
    input point order.
    """
    if geometry.layer_count == 0 or geometry.azimuth_count == 0:
        raise EmptyGeometry("geometry has an empty grid")
    l, w = geometry.shape
    pts = cloud.points
    if pts.size == 0:
        return DistanceImage(ranges=np.zeros((l, w)), valid=np.zeros((l, w), bool),
                             geometry=geometry)
    if not np.isfinite(pts).all():
        raise GeometryError("cloud points must be finite")
    r = np.linalg.norm(pts, axis=1)
    if (r == 0).any():
        raise OriginPoint("point at the exact sensor origin cannot be projected")

    theta = np.arcsin(np.clip(pts[:, 2] / r, -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0])

    elev = geometry.elevations
    ascending = elev[-1] > elev[0]
    e_sorted = elev if ascending else elev[::-1]
    # Envelope: half the edge spacing beyond the outermost layers.
    lo = e_sorted[0] - 0.5 * (e_sorted[1] - e_sorted[0])
    hi = e_sorted[-1] + 0.5 * (e_sorted[-1] - e_sorted[-2])
    mids = 0.5 * (e_sorted[1:] + e_sorted[:-1])
    i_sorted = np.searchsorted(mids, theta, side="left")
    i_bin = i_sorted if ascending else (l - 1 - i_sorted)

    # Nearest azimuth bin with wrap; exact midpoints go to the lower index.
    dphi = geometry.azimuths[1] - geometry.azimuths[0]
    x = (phi - geometry.azimuths[0]) / dphi
    j_bin = np.ceil(x - 0.5).astype(np.int64) % w

    keep = (theta >= lo) & (theta <= hi) & (r <= geometry.max_range * _RANGE_SLACK)

    idx = np.nonzero(keep)[0]
    r_k = r[idx]
    # Descending by range (ties broken by coordinates) so the final write
    # per cell is the nearest point regardless of input order.
    p = pts[idx]
    order = np.lexsort((p[:, 2], p[:, 1], p[:, 0], r_k))[::-1]
    sel = idx[order]

    ranges = np.zeros((l, w))
    valid = np.zeros((l, w), bool)
    ranges[i_bin[sel], j_bin[sel]] = r[sel]
    valid[i_bin[sel], j_bin[sel]] = True

    labels = None
    if cloud.labels is not None:
        labels = np.full((l, w), IGNORE_ID, dtype=np.uint8)
        labels[i_bin[sel], j_bin[sel]] = cloud.labels[sel]
    return DistanceImage(ranges=ranges, valid=valid, geometry=geometry,
                         labels=labels)


def back_project(image: DistanceImage) -> PointCloud:
    """One Cartesian point per valid cell via the spherical-to-Cartesian map."""
    i, j = np.nonzero(image.valid)
    r = image.ranges[i, j]
    theta = image.geometry.elevations[i]
    phi = image.geometry.azimuths[j]
    ct = np.cos(theta)
    pts = np.stack([r * ct * np.cos(phi), r * ct * np.sin(phi),
                    r * np.sin(theta)], axis=1)
    labels = image.labels[i, j] if image.labels is not None else None
    return PointCloud(points=pts, rows=i, cols=j, labels=labels)


def decimate(image: DistanceImage, keep_parity: str = "even") -> DistanceImage:
    """Drop every other layer, keeping rows of the requested 0-based parity."""
    l = image.shape[0]
    if l % 2 != 0:
        raise OddLayerCount(f"cannot decimate an image with {l} rows")
    if keep_parity not in ("even", "odd"):
        raise ValueError(f"keep_parity must be 'even' or 'odd', got {keep_parity!r}")
    start = 0 if keep_parity == "even" else 1
    geom = SensorGeometry(elevations=image.geometry.elevations[start::2],
                          azimuths=image.geometry.azimuths,
                          max_range=image.geometry.max_range)
    labels = image.labels[start::2] if image.labels is not None else None
    return DistanceImage(ranges=image.ranges[start::2], valid=image.valid[start::2],
                         geometry=geom, labels=labels)


def to_network_raster(image: DistanceImage) -> np.ndarray:
    """Dense raster for the network: ranges at valid cells, 0.0 elsewhere."""
    return np.where(image.valid, image.ranges, 0.0)


# --- LDI file format ----------------------------------------------------------

_FLAG_ELEV = 1
_FLAG_AZIM = 2
_FLAG_LABELS = 4


def write_ldi(image: DistanceImage, path, include_tables=True):
    """Write a distance image; missing cells become NaN, labels optional."""
    l, w = image.shape
    flags = 0
    if include_tables:
        flags |= _FLAG_ELEV | _FLAG_AZIM
    if image.labels is not None:
        flags |= _FLAG_LABELS
    with open(path, "wb") as f:
        f.write(LDI_MAGIC)
        f.write(struct.pack("<III", l, w, flags))
        if include_tables:
            f.write(np.asarray(image.geometry.elevations, dtype="<f4").tobytes())
            f.write(np.asarray(image.geometry.azimuths, dtype="<f4").tobytes())
        ranges = np.where(image.valid, image.ranges, np.nan)
        f.write(np.asarray(ranges, dtype="<f4").tobytes())
        if image.labels is not None:
            f.write(image.labels.astype(np.uint8).tobytes())


def read_ldi(path, geometry: SensorGeometry | None = None,
             max_range: float | None = None) -> DistanceImage:
    """Read an LDI file.

    If the file carries elevation/azimuth tables a geometry is rebuilt from
    them (max_range defaults to the largest stored range); otherwise the
    caller must supply one.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:4] != LDI_MAGIC:
        raise CorruptFile(f"{path}: not an LDI file")
    l, w, flags = struct.unpack_from("<III", blob, 4)
    off = 16

    def take(n):
        nonlocal off
        chunk = blob[off:off + n]
        if len(chunk) != n:
            raise CorruptFile(f"{path}: truncated (needed {n} bytes at {off})")
        off += n
        return chunk

    elev = azim = None
    if flags & _FLAG_ELEV:
        elev = np.frombuffer(take(4 * l), dtype="<f4").astype(np.float64)
    if flags & _FLAG_AZIM:
        azim = np.frombuffer(take(4 * w), dtype="<f4").astype(np.float64)
        # float32 storage quantizes the table; restore the uniform grid
        step = np.diff(azim)
        if step.size and np.ptp(step) < 1e-5:
            azim = azim[0] + step.mean() * np.arange(w)
    ranges = np.frombuffer(take(4 * l * w), dtype="<f4").astype(np.float64)
    ranges = ranges.reshape(l, w)
    labels = None
    if flags & _FLAG_LABELS:
        labels = np.frombuffer(take(l * w), dtype=np.uint8).reshape(l, w)
    if off != len(blob):
        raise CorruptFile(f"{path}: {len(blob) - off} trailing bytes")

    valid = np.isfinite(ranges)
    if geometry is None:
        if elev is None or azim is None:
            raise CorruptFile(
                f"{path}: no geometry tables in file and none supplied")
        if max_range is None:
            max_range = float(ranges[valid].max()) if valid.any() else 1.0
        geometry = SensorGeometry(elevations=elev, azimuths=azim,
                                  max_range=max_range)
    elif geometry.shape != (l, w):
        raise CorruptFile(
            f"{path}: raster is {(l, w)} but geometry is {geometry.shape}")
    return DistanceImage(ranges=np.where(valid, ranges, 0.0), valid=valid,
                         geometry=geometry, labels=labels)

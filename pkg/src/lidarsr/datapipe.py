"""Dataset plumbing: raw-scan ingestion, pair construction, splits.

Low/high training pairs come from layer decimation of a high-resolution
frame; the even rows form the network input and the full frame the target,
so input rows and predicted-only rows never overlap.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import EmptyDataset, MalformedFile
from .geometry import DistanceImage, PointCloud, SensorGeometry, decimate, project
from .simulate import random_scene, simulate_scene

RECORD_BYTES = 16  # x, y, z, reflectance as little-endian float32


def ingest_bin(path, geometry: SensorGeometry) -> DistanceImage:
    """Project a raw (x, y, z, reflectance) float32 file onto the grid.

    Reflectance is discarded; all-zero padding points at the exact origin
    are dropped before projection.
    """
    blob = Path(path).read_bytes()
    if len(blob) % RECORD_BYTES != 0:
        raise MalformedFile(
            f"{path}: length {len(blob)} is not a multiple of {RECORD_BYTES}")
    data = np.frombuffer(blob, dtype="<f4").reshape(-1, 4).astype(np.float64)
    pts = data[:, :3]
    keep = np.isfinite(pts).all(axis=1) & (np.abs(pts).sum(axis=1) > 0)
    return project(PointCloud(points=pts[keep]), geometry)


def make_pair(high: DistanceImage):
    """(low, high): even-parity decimation as input, full frame as target."""
    return decimate(high, "even"), high


def synthesize_dataset(geometry: SensorGeometry, seeds, dropout: float = 0.0):
    """One exact simulated frame (with labels) per scene seed."""
    return [simulate_scene(random_scene(int(s), dropout=dropout), geometry)
            for s in seeds]


def split_dataset(frames, fractions=(0.62, 0.13, 0.25)):
    """Contiguous (train, val, test) split, the analog of a sequence split."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {fractions}")
    if not frames:
        raise EmptyDataset("cannot split an empty dataset")
    n = len(frames)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    return (list(frames[:n_train]), list(frames[n_train:n_train + n_val]),
            list(frames[n_train + n_val:]))

"""LiDAR scan vertical super-resolution toolkit.

Converts structured point clouds to cylindrical distance images, up-samples
them with a residual CNN trained under masked point-wise, perceptual, or
semantic-consistency losses, and evaluates against classical interpolation
baselines with masked MAE/MSE, mIoU, and mean-opinion-score tooling.
"""

from .geometry import (  # noqa: F401
    DistanceImage,
    PointCloud,
    SensorGeometry,
    back_project,
    build_sensor,
    decimate,
    project,
    read_ldi,
    to_network_raster,
    write_ldi,
)

__all__ = [
    "SensorGeometry",
    "DistanceImage",
    "PointCloud",
    "build_sensor",
    "project",
    "back_project",
    "decimate",
    "to_network_raster",
    "read_ldi",
    "write_ldi",
]

__version__ = "0.1.0"

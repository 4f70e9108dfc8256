"""Synthetic scene oracle: analytic ray casting against simple primitives.

Each grid ray (theta_i, phi_j) intersects a ground plane, axis-aligned
boxes, vertical capped cylinders, and spheres in closed form; the nearest
hit within max_range becomes a valid cell with the exact distance and the
primitive's class id. Misses are invalid cells labeled sky. An optional
dropout probability turns hits into missing measurements (labels keep the
true class) to emulate reflection failures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePrimitive
from .extractor import ClassCatalog
from .geometry import DistanceImage, SensorGeometry

_CATALOG = ClassCatalog()
ROAD = _CATALOG.id_of("road")
TERRAIN = _CATALOG.id_of("terrain")
SKY = _CATALOG.id_of("sky")

_EPS = 1e-9


def _finite3(v, what):
    v = np.asarray(v, dtype=np.float64).reshape(3)
    if not np.isfinite(v).all():
        raise DegeneratePrimitive(f"{what} must be finite, got {v}")
    return v


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box given by center and positive half extents."""

    center: np.ndarray
    half_extents: np.ndarray
    class_id: int

    def __post_init__(self):
        object.__setattr__(self, "center", _finite3(self.center, "box center"))
        he = _finite3(self.half_extents, "box half_extents")
        if (he <= 0).any():
            raise DegeneratePrimitive(f"box half_extents must be positive: {he}")
        object.__setattr__(self, "half_extents", he)

    def intersect(self, origin, dirs):
        # Slab method; rays parallel to a slab use +/- inf bounds.
        lo = self.center - self.half_extents
        hi = self.center + self.half_extents
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (lo[None] - origin[None]) * inv
            t2 = (hi[None] - origin[None]) * inv
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        parallel = np.abs(dirs) < _EPS
        inside = (origin[None] >= lo[None]) & (origin[None] <= hi[None])
        tmin[parallel] = -np.inf
        tmax[parallel] = np.inf
        miss_parallel = parallel & ~inside
        t_enter = tmin.max(axis=1)
        t_exit = tmax.min(axis=1)
        t = np.where(t_enter > _EPS, t_enter, t_exit)
        ok = (t_exit >= t_enter) & (t > _EPS) & ~miss_parallel.any(axis=1)
        return np.where(ok, t, np.inf)


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float
    class_id: int

    def __post_init__(self):
        object.__setattr__(self, "center", _finite3(self.center, "sphere center"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DegeneratePrimitive(f"sphere radius must be positive: {self.radius}")

    def intersect(self, origin, dirs):
        oc = origin - self.center
        b = dirs @ oc
        c = oc @ oc - self.radius * self.radius
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_near = -b - sq
        t_far = -b + sq
        t = np.where(t_near > _EPS, t_near, t_far)
        return np.where(ok & (t > _EPS), t, np.inf)


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Vertical capped cylinder: base center, radius, height upward."""

    base: np.ndarray
    radius: float
    height: float
    class_id: int

    def __post_init__(self):
        object.__setattr__(self, "base", _finite3(self.base, "cylinder base"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DegeneratePrimitive(f"cylinder radius must be positive: {self.radius}")
        if not (np.isfinite(self.height) and self.height > 0):
            raise DegeneratePrimitive(f"cylinder height must be positive: {self.height}")

    def intersect(self, origin, dirs):
        z0 = self.base[2]
        z1 = z0 + self.height
        oc = origin[:2] - self.base[:2]
        d2 = dirs[:, :2]
        a = (d2 * d2).sum(axis=1)
        b = d2 @ oc
        c = oc @ oc - self.radius * self.radius
        best = np.full(dirs.shape[0], np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = b * b - a * c
            ok = (disc >= 0) & (a > _EPS)
            sq = np.sqrt(np.where(ok, disc, 0.0))
            for t_side in ((-b - sq) / a, (-b + sq) / a):
                z = origin[2] + t_side * dirs[:, 2]
                hit = ok & (t_side > _EPS) & (z >= z0) & (z <= z1)
                best = np.where(hit & (t_side < best), t_side, best)
            # End caps.
            for z_cap in (z0, z1):
                t_cap = (z_cap - origin[2]) / dirs[:, 2]
                px = origin[0] + t_cap * dirs[:, 0] - self.base[0]
                py = origin[1] + t_cap * dirs[:, 1] - self.base[1]
                hit = (np.abs(dirs[:, 2]) > _EPS) & (t_cap > _EPS) & \
                    (px * px + py * py <= self.radius * self.radius)
                best = np.where(hit & (t_cap < best), t_cap, best)
        return best


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """Ground plane plus primitives, viewed from a fixed sensor position."""

    seed: int = 0
    ground_height: float = -1.8
    ground_class: int = ROAD
    primitives: tuple = ()
    sensor_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        object.__setattr__(self, "sensor_position",
                           _finite3(self.sensor_position, "sensor position"))
        if not np.isfinite(self.ground_height):
            raise DegeneratePrimitive("ground height must be finite")
        if not (0.0 <= self.dropout < 1.0):
            raise DegeneratePrimitive(f"dropout must be in [0, 1): {self.dropout}")


def ray_directions(geometry: SensorGeometry) -> np.ndarray:
    """(L*W, 3) unit directions for the scan grid, row-major."""
    theta = geometry.elevations[:, None]
    phi = geometry.azimuths[None, :]
    ct = np.cos(theta)
    dirs = np.stack([np.broadcast_to(ct * np.cos(phi), (geometry.layer_count,
                                                        geometry.azimuth_count)),
                     np.broadcast_to(ct * np.sin(phi), (geometry.layer_count,
                                                        geometry.azimuth_count)),
                     np.broadcast_to(np.sin(theta) * np.ones_like(phi),
                                     (geometry.layer_count,
                                      geometry.azimuth_count))], axis=2)
    return dirs.reshape(-1, 3)


def simulate_scene(spec: SceneSpec, geometry: SensorGeometry) -> DistanceImage:
    """Exact nearest-hit distances and class labels for every grid ray."""
    l, w = geometry.shape
    origin = spec.sensor_position
    dirs = ray_directions(geometry)

    best = np.full(l * w, np.inf)
    cls = np.full(l * w, SKY, dtype=np.uint8)

    # Ground plane behaves like any other primitive.
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = (spec.ground_height - origin[2]) / dz
    hit = (np.abs(dz) > _EPS) & (t_ground > _EPS)
    best = np.where(hit, t_ground, best)
    cls = np.where(hit, np.uint8(spec.ground_class), cls)

    for prim in spec.primitives:
        t = prim.intersect(origin, dirs)
        closer = t < best
        best = np.where(closer, t, best)
        cls = np.where(closer, np.uint8(prim.class_id), cls)

    valid = np.isfinite(best) & (best <= geometry.max_range)
    if spec.dropout > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x9E3779B9]))
        drop = rng.random(l * w) < spec.dropout
        valid &= ~drop
    ranges = np.where(valid, best, 0.0).reshape(l, w)
    return DistanceImage(ranges=ranges, valid=valid.reshape(l, w),
                         geometry=geometry, labels=cls.reshape(l, w))


def random_scene(seed: int, *, num_primitives=(6, 14), dropout: float = 0.0,
                 sensor_height: float = 0.0) -> SceneSpec:
    """Seeded street-like scene: ground, walls, cars, poles, canopies."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x51CEE5]))
    cat = _CATALOG
    n = int(rng.integers(num_primitives[0], num_primitives[1] + 1))
    prims = []
    for _ in range(n):
        kind = rng.choice(("car", "building", "truck", "pole", "trunk", "canopy",
                           "person", "sign"))
        ang = rng.uniform(-np.pi, np.pi)
        dist = rng.uniform(4.0, 45.0)
        x, y = dist * np.cos(ang), dist * np.sin(ang)
        ground = -1.8 + sensor_height
        if kind == "car":
            he = rng.uniform((1.6, 0.8, 0.6), (2.6, 1.1, 0.9))
            prims.append(Box((x, y, ground + he[2]), he, cat.id_of("car")))
        elif kind == "truck":
            he = rng.uniform((3.0, 1.2, 1.2), (5.0, 1.5, 1.8))
            prims.append(Box((x, y, ground + he[2]), he, cat.id_of("truck-bus")))
        elif kind == "building":
            he = rng.uniform((3.0, 3.0, 3.0), (10.0, 10.0, 9.0))
            d2 = rng.uniform(12.0, 55.0)
            prims.append(Box((d2 * np.cos(ang), d2 * np.sin(ang), ground + he[2]),
                             he, cat.id_of("building")))
        elif kind == "pole":
            prims.append(Cylinder((x, y, ground), rng.uniform(0.08, 0.25),
                                  rng.uniform(2.5, 6.0), cat.id_of("pole")))
        elif kind == "trunk":
            base = (x, y, ground)
            h = rng.uniform(2.0, 4.0)
            prims.append(Cylinder(base, rng.uniform(0.15, 0.4), h,
                                  cat.id_of("vegetation")))
            prims.append(Sphere((x, y, ground + h + rng.uniform(0.5, 1.5)),
                                rng.uniform(1.0, 2.5), cat.id_of("vegetation")))
        elif kind == "canopy":
            prims.append(Sphere((x, y, ground + rng.uniform(2.0, 5.0)),
                                rng.uniform(1.0, 3.0), cat.id_of("vegetation")))
        elif kind == "person":
            prims.append(Cylinder((x * 0.5, y * 0.5, ground), rng.uniform(0.2, 0.35),
                                  rng.uniform(1.5, 1.9), cat.id_of("person")))
        else:  # sign
            prims.append(Box((x, y, ground + rng.uniform(1.5, 2.5)),
                             (0.05, rng.uniform(0.3, 0.5), rng.uniform(0.3, 0.5)),
                             cat.id_of("traffic sign")))
    ground_class = ROAD if rng.random() < 0.7 else TERRAIN
    return SceneSpec(seed=seed, ground_height=-1.8 + sensor_height,
                     ground_class=ground_class, primitives=tuple(prims),
                     sensor_position=np.array([0.0, 0.0, sensor_height]),
                     dropout=dropout)

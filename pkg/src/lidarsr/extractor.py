"""Fixed feature extractor and 13-class segmentation head.

Five sequential blocks of two zero-padded 3x3 convs (each BN + ReLU) with
no spatial down-sampling, followed by a 1x1 conv to 13 class logits. Tap b
(0..3) exposes the activation after block b for the perceptual loss. Loss
usage freezes every tensor; only pre-training flips requires_grad on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import BadConfig, ShapeMismatchVsConfig, TapOutOfRange

NUM_CLASSES = 13
IGNORE_ID = 255

DEFAULT_CLASS_NAMES = (
    "road", "sidewalk", "person", "rider", "car", "truck-bus", "two-wheeler",
    "building", "pole", "traffic sign", "vegetation", "terrain", "sky",
)

_BUFFER_SUFFIXES = ("running_mean", "running_var")


@dataclass(frozen=True)
class ClassCatalog:
    names: tuple = DEFAULT_CLASS_NAMES
    ignore_id: int = IGNORE_ID

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != NUM_CLASSES or len(set(self.names)) != NUM_CLASSES:
            raise BadConfig(f"catalog needs {NUM_CLASSES} unique class names")
        if 0 <= self.ignore_id < NUM_CLASSES:
            raise BadConfig("ignore_id must lie outside the class id range")

    def id_of(self, name):
        return self.names.index(name)


@dataclass(frozen=True)
class ExtractorConfig:
    block_filters: tuple = (32, 64, 96, 96, 64)
    num_classes: int = NUM_CLASSES
    tap_points: tuple = (0, 1, 2, 3)

    def __post_init__(self):
        object.__setattr__(self, "block_filters", tuple(self.block_filters))
        object.__setattr__(self, "tap_points", tuple(self.tap_points))
        if len(self.block_filters) != 5 or any(f < 1 for f in self.block_filters):
            raise BadConfig("block_filters must list 5 positive counts")
        if self.num_classes != NUM_CLASSES:
            raise BadConfig(f"num_classes must be {NUM_CLASSES}")
        if not set(self.tap_points) <= {0, 1, 2, 3}:
            raise BadConfig("tap points must be block indices 0..3")


@dataclass
class ExtractorWeights:
    config: ExtractorConfig
    tensors: dict = field(default_factory=dict)
    catalog: ClassCatalog = field(default_factory=ClassCatalog)

    def parameters(self):
        return [t for name, t in self.tensors.items()
                if not name.endswith(_BUFFER_SUFFIXES)]

    def astype(self, dtype):
        """Cast parameters (BN running stats stay float64 for accumulation)."""
        out = {}
        for name, t in self.tensors.items():
            d = t.data if name.endswith(_BUFFER_SUFFIXES) else t.data.astype(dtype)
            out[name] = Tensor(d.copy(), requires_grad=t.requires_grad)
        return ExtractorWeights(config=self.config, tensors=out,
                                catalog=self.catalog)

    def freeze(self):
        """Drop trainability; loss usage must not expose trainable tensors."""
        for t in self.tensors.values():
            t.requires_grad = False
        return self

    def trainable(self):
        for name, t in self.tensors.items():
            t.requires_grad = not name.endswith(_BUFFER_SUFFIXES)
        return self

    def features_t(self, x: Tensor, tap: int, training: bool = False) -> Tensor:
        return _run_blocks(self, x, 0, tap + 1, training)

    def logits_t(self, x: Tensor, training: bool = False) -> Tensor:
        t = _run_blocks(self, x, 0, 5, training)
        return ad.conv2d(t, self.tensors["head.kernel"], self.tensors["head.bias"])


def build_extractor(config: ExtractorConfig, seed: int = 0) -> ExtractorWeights:
    rng = np.random.default_rng(seed)
    tensors = {}
    prev = 1
    for b, ch in enumerate(config.block_filters):
        for ci, cin in ((1, prev), (2, ch)):
            fan_in = cin * 9
            tensors[f"block{b}.conv{ci}.kernel"] = Tensor(
                rng.standard_normal((ch, cin, 3, 3)) * np.sqrt(2.0 / fan_in),
                requires_grad=True)
            tensors[f"block{b}.conv{ci}.bias"] = Tensor(np.zeros(ch),
                                                        requires_grad=True)
            tensors[f"block{b}.bn{ci}.gamma"] = Tensor(np.ones(ch),
                                                       requires_grad=True)
            tensors[f"block{b}.bn{ci}.beta"] = Tensor(np.zeros(ch),
                                                      requires_grad=True)
            tensors[f"block{b}.bn{ci}.running_mean"] = Tensor(np.zeros(ch))
            tensors[f"block{b}.bn{ci}.running_var"] = Tensor(np.ones(ch))
        prev = ch
    tensors["head.kernel"] = Tensor(
        rng.standard_normal((config.num_classes, prev, 1, 1)) * np.sqrt(2.0 / prev),
        requires_grad=True)
    tensors["head.bias"] = Tensor(np.zeros(config.num_classes), requires_grad=True)
    return ExtractorWeights(config=config, tensors=tensors)


def _check_tap(weights, tap):
    if tap not in weights.config.tap_points:
        raise TapOutOfRange(
            f"tap {tap} not in configured taps {weights.config.tap_points}")


def _run_blocks(weights, x: Tensor, start: int, stop: int, training: bool) -> Tensor:
    t = x
    for b in range(start, stop):
        for ci in (1, 2):
            t = ad.conv2d(t, weights.tensors[f"block{b}.conv{ci}.kernel"],
                          weights.tensors[f"block{b}.conv{ci}.bias"],
                          padding=(1, 1))
            t = ad.batch_norm(
                t, weights.tensors[f"block{b}.bn{ci}.gamma"],
                weights.tensors[f"block{b}.bn{ci}.beta"],
                weights.tensors[f"block{b}.bn{ci}.running_mean"].data,
                weights.tensors[f"block{b}.bn{ci}.running_var"].data, training)
            t = ad.relu(t)
    return t


def _as_batch(raster):
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2:
        raise BadConfig(f"expected a 2-d raster, got shape {raster.shape}")
    return Tensor(raster[None, None])


def features(weights: ExtractorWeights, raster: np.ndarray, tap: int) -> np.ndarray:
    """Eval-mode activation (C, H, W) at tap b for one raster."""
    _check_tap(weights, tap)
    return weights.features_t(_as_batch(raster), tap).data[0]


def logits(weights: ExtractorWeights, raster: np.ndarray) -> np.ndarray:
    """Eval-mode class scores (13, H, W) for one raster."""
    return weights.logits_t(_as_batch(raster)).data[0]


def continue_from_tap(weights: ExtractorWeights, feature_map: np.ndarray,
                      tap: int) -> np.ndarray:
    """Recompute logits from a tap-b activation (the tap is a true prefix)."""
    _check_tap(weights, tap)
    t = Tensor(np.asarray(feature_map, dtype=np.float64)[None])
    t = _run_blocks(weights, t, tap + 1, 5, training=False)
    return ad.conv2d(t, weights.tensors["head.kernel"],
                     weights.tensors["head.bias"]).data[0]


def predict_labels(weights: ExtractorWeights, raster: np.ndarray) -> np.ndarray:
    """Argmax class-id raster for one network-input raster."""
    return np.argmax(logits(weights, raster), axis=0).astype(np.uint8)


def save_extractor(weights: ExtractorWeights, path):
    path = Path(path)
    ad.save_tensors(path, {n: t.data for n, t in weights.tensors.items()})
    manifest = {
        "block_filters": list(weights.config.block_filters),
        "num_classes": weights.config.num_classes,
        "tap_points": list(weights.config.tap_points),
        "class_names": list(weights.catalog.names),
        "ignore_id": weights.catalog.ignore_id,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_extractor(path, config: ExtractorConfig | None = None) -> ExtractorWeights:
    """Load a frozen extractor checkpoint (call .trainable() to fine-tune)."""
    path = Path(path)
    catalog = ClassCatalog()
    if config is None:
        sidecar = path.with_suffix(path.suffix + ".json")
        if not sidecar.exists():
            raise BadConfig(f"no config given and no sidecar manifest {sidecar}")
        m = json.loads(sidecar.read_text(encoding="utf-8"))
        config = ExtractorConfig(block_filters=tuple(m["block_filters"]),
                                 num_classes=m["num_classes"],
                                 tap_points=tuple(m["tap_points"]))
        catalog = ClassCatalog(names=tuple(m["class_names"]),
                               ignore_id=m["ignore_id"])
    loaded = ad.load_tensors(path)
    expected = {name: t.data.shape
                for name, t in build_extractor(config, seed=0).tensors.items()}
    for name in loaded:
        if name not in expected:
            raise ShapeMismatchVsConfig(name, "unexpected tensor")
    for name, shape in expected.items():
        if name not in loaded:
            raise ShapeMismatchVsConfig(name, "missing tensor")
        if loaded[name].shape != shape:
            raise ShapeMismatchVsConfig(
                name, f"shape {loaded[name].shape} != expected {shape}")
    tensors = {name: Tensor(loaded[name]) for name in expected}
    return ExtractorWeights(config=config, tensors=tensors, catalog=catalog)

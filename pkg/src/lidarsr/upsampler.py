"""Residual up-sampling CNN: H x W distance raster in, 2H x W raster out.

Stack: 9x9 stem conv + BN + ReLU, N residual blocks (two 3x3 convs with BN,
ReLU after the first, identity skip, no activation after the sum), a (4,1)
transposed conv with stride (2,1) and pad (1,0) for the exact 2x vertical
up-scaling (BN + ReLU), and a bare 9x9 head conv. Fully convolutional, so
trained weights run at any resolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import BadConfig, InputTooSmall, ShapeMismatchVsConfig

MIN_HEIGHT = 8
MIN_WIDTH = 16

_BUFFER_SUFFIXES = ("running_mean", "running_var")


@dataclass(frozen=True)
class UpsamplerConfig:
    residual_blocks: int = 16
    base_filters: int = 64
    stem_kernel: tuple = (9, 9)
    trans_kernel: tuple = (4, 1)
    trans_stride: tuple = (2, 1)
    input_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stem_kernel", tuple(self.stem_kernel))
        object.__setattr__(self, "trans_kernel", tuple(self.trans_kernel))
        object.__setattr__(self, "trans_stride", tuple(self.trans_stride))
        if self.residual_blocks < 1:
            raise BadConfig("residual_blocks must be >= 1")
        if self.base_filters < 1:
            raise BadConfig("base_filters must be >= 1")
        if self.input_channels != 1:
            raise BadConfig("only single-channel distance input is supported")
        kh, kw = self.stem_kernel
        if kh % 2 == 0 or kw % 2 == 0:
            raise BadConfig("stem kernel sides must be odd")
        tkh, tkw = self.trans_kernel
        sh, sw = self.trans_stride
        # H' = (H-1)*sh - 2*ph + tkh must equal 2H with ph = (tkh - sh) / 2.
        if sh != 2 or sw != 1 or tkw != 1 or tkh < 2 or (tkh - 2) % 2 != 0:
            raise BadConfig(
                f"trans kernel {self.trans_kernel} / stride {self.trans_stride} "
                "cannot realize an exact 2x vertical up-scaling")

    @property
    def trans_padding(self):
        return ((self.trans_kernel[0] - 2) // 2, 0)


@dataclass
class UpsamplerWeights:
    """Named parameter and buffer tensors, ordered as built."""

    config: UpsamplerConfig
    tensors: dict = field(default_factory=dict)

    def parameters(self):
        return [t for name, t in self.tensors.items()
                if not name.endswith(_BUFFER_SUFFIXES)]

    def copy(self):
        out = {}
        for name, t in self.tensors.items():
            c = Tensor(t.data.copy(), requires_grad=t.requires_grad)
            out[name] = c
        return UpsamplerWeights(config=self.config, tensors=out)

    def astype(self, dtype):
        """Cast parameters (BN running stats stay float64 for accumulation)."""
        out = {}
        for name, t in self.tensors.items():
            d = t.data if name.endswith(_BUFFER_SUFFIXES) else t.data.astype(dtype)
            out[name] = Tensor(d.copy(), requires_grad=t.requires_grad)
        return UpsamplerWeights(config=self.config, tensors=out)


def _conv_init(rng, out_ch, in_ch, kh, kw):
    fan_in = in_ch * kh * kw
    return rng.standard_normal((out_ch, in_ch, kh, kw)) * np.sqrt(2.0 / fan_in)


def _add_conv(tensors, rng, name, out_ch, in_ch, kh, kw):
    tensors[f"{name}.kernel"] = Tensor(_conv_init(rng, out_ch, in_ch, kh, kw),
                                       requires_grad=True)
    tensors[f"{name}.bias"] = Tensor(np.zeros(out_ch), requires_grad=True)


def _add_bn(tensors, name, ch):
    tensors[f"{name}.gamma"] = Tensor(np.ones(ch), requires_grad=True)
    tensors[f"{name}.beta"] = Tensor(np.zeros(ch), requires_grad=True)
    tensors[f"{name}.running_mean"] = Tensor(np.zeros(ch))
    tensors[f"{name}.running_var"] = Tensor(np.ones(ch))


def build_upsampler(config: UpsamplerConfig, seed: int = 0) -> UpsamplerWeights:
    """Kaiming-initialized weights; identical seeds give identical tensors."""
    rng = np.random.default_rng(seed)
    f = config.base_filters
    kh, kw = config.stem_kernel
    tensors = {}
    _add_conv(tensors, rng, "stem.conv", f, config.input_channels, kh, kw)
    _add_bn(tensors, "stem.bn", f)
    for b in range(config.residual_blocks):
        _add_conv(tensors, rng, f"res{b}.conv1", f, f, 3, 3)
        _add_bn(tensors, f"res{b}.bn1", f)
        _add_conv(tensors, rng, f"res{b}.conv2", f, f, 3, 3)
        _add_bn(tensors, f"res{b}.bn2", f)
    tkh, tkw = config.trans_kernel
    # conv_transpose kernels are (Cin, Cout, Kh, Kw); fan-in is Cin per tap.
    tensors["trans.conv.kernel"] = Tensor(
        rng.standard_normal((f, f, tkh, tkw)) * np.sqrt(2.0 / (f * tkh * tkw)),
        requires_grad=True)
    tensors["trans.conv.bias"] = Tensor(np.zeros(f), requires_grad=True)
    _add_bn(tensors, "trans.bn", f)
    _add_conv(tensors, rng, "head.conv", 1, f, kh, kw)
    return UpsamplerWeights(config=config, tensors=tensors)


def _bn(w, name, x, training):
    return ad.batch_norm(x, w.tensors[f"{name}.gamma"], w.tensors[f"{name}.beta"],
                         w.tensors[f"{name}.running_mean"].data,
                         w.tensors[f"{name}.running_var"].data, training)


def forward_tensor(weights: UpsamplerWeights, x: Tensor, training: bool = False) -> Tensor:
    """Graph-building forward over an (N, 1, H, W) batch tensor."""
    cfg = weights.config
    n, c, h, wd = x.shape
    if c != cfg.input_channels:
        raise InputTooSmall(f"expected {cfg.input_channels}-channel input, got {c}")
    if h < MIN_HEIGHT or wd < MIN_WIDTH:
        raise InputTooSmall(
            f"input {h}x{wd} below the {MIN_HEIGHT}x{MIN_WIDTH} minimum")
    w = weights
    kh, kw = cfg.stem_kernel
    pad = (kh // 2, kw // 2)
    t = ad.conv2d(x, w.tensors["stem.conv.kernel"], w.tensors["stem.conv.bias"],
                  padding=pad)
    t = ad.relu(_bn(w, "stem.bn", t, training))
    for b in range(cfg.residual_blocks):
        r = ad.conv2d(t, w.tensors[f"res{b}.conv1.kernel"],
                      w.tensors[f"res{b}.conv1.bias"], padding=(1, 1))
        r = ad.relu(_bn(w, f"res{b}.bn1", r, training))
        r = ad.conv2d(r, w.tensors[f"res{b}.conv2.kernel"],
                      w.tensors[f"res{b}.conv2.bias"], padding=(1, 1))
        r = _bn(w, f"res{b}.bn2", r, training)
        t = ad.add(t, r)
    t = ad.conv_transpose2d(t, w.tensors["trans.conv.kernel"],
                            w.tensors["trans.conv.bias"],
                            stride=cfg.trans_stride, padding=cfg.trans_padding)
    t = ad.relu(_bn(w, "trans.bn", t, training))
    return ad.conv2d(t, w.tensors["head.conv.kernel"],
                     w.tensors["head.conv.bias"], padding=pad)


def forward(weights: UpsamplerWeights, raster: np.ndarray, mode: str = "eval") -> np.ndarray:
    """Up-sample one H x W raster to 2H x W. No activation clamps the head."""
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2:
        raise InputTooSmall(f"expected a 2-d raster, got shape {raster.shape}")
    if not np.isfinite(raster).all():
        raise InputTooSmall("raster must be finite")
    out = forward_tensor(weights, Tensor(raster[None, None]),
                         training=(mode == "train"))
    return out.data[0, 0]


def _expected_names(config: UpsamplerConfig):
    return {name: t.data.shape
            for name, t in build_upsampler(config, seed=0).tensors.items()}


def save_weights(weights: UpsamplerWeights, path):
    """Write LWT tensors plus a sidecar JSON manifest with the config."""
    path = Path(path)
    ad.save_tensors(path, {n: t.data for n, t in weights.tensors.items()})
    manifest = {
        "residual_blocks": weights.config.residual_blocks,
        "base_filters": weights.config.base_filters,
        "stem_kernel": list(weights.config.stem_kernel),
        "trans_kernel": list(weights.config.trans_kernel),
        "trans_stride": list(weights.config.trans_stride),
        "input_channels": weights.config.input_channels,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_weights(path, config: UpsamplerConfig | None = None) -> UpsamplerWeights:
    """Load an LWT checkpoint, validating names/shapes against the config.

    The config comes from the sidecar manifest unless given explicitly.
    """
    path = Path(path)
    if config is None:
        sidecar = path.with_suffix(path.suffix + ".json")
        if not sidecar.exists():
            raise BadConfig(f"no config given and no sidecar manifest {sidecar}")
        m = json.loads(sidecar.read_text(encoding="utf-8"))
        config = UpsamplerConfig(
            residual_blocks=m["residual_blocks"], base_filters=m["base_filters"],
            stem_kernel=tuple(m["stem_kernel"]), trans_kernel=tuple(m["trans_kernel"]),
            trans_stride=tuple(m["trans_stride"]),
            input_channels=m.get("input_channels", 1))
    loaded = ad.load_tensors(path)
    expected = _expected_names(config)
    for name in loaded:
        if name not in expected:
            raise ShapeMismatchVsConfig(name, "unexpected tensor")
    for name, shape in expected.items():
        if name not in loaded:
            raise ShapeMismatchVsConfig(name, "missing tensor")
        if loaded[name].shape != shape:
            raise ShapeMismatchVsConfig(
                name, f"shape {loaded[name].shape} != expected {shape}")
    tensors = {name: Tensor(loaded[name],
                            requires_grad=not name.endswith(_BUFFER_SUFFIXES))
               for name in expected}
    return UpsamplerWeights(config=config, tensors=tensors)

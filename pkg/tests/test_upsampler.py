"""Residual up-sampler: shapes, determinism, parameter counts, checkpoints."""

import numpy as np
import pytest

from lidarsr import autodiff as ad
from lidarsr.autodiff import Tensor
from lidarsr.errors import BadConfig, CorruptFile, InputTooSmall, ShapeMismatchVsConfig
from lidarsr.upsampler import (
    UpsamplerConfig,
    build_upsampler,
    forward,
    forward_tensor,
    load_weights,
    save_weights,
)

TINY = UpsamplerConfig(residual_blocks=1, base_filters=8)
SMALL = UpsamplerConfig(residual_blocks=2, base_filters=16)


def expected_parameter_count(cfg):
    """Closed-form trainable parameter count from the layer shapes."""
    f = cfg.base_filters
    kh, kw = cfg.stem_kernel
    stem = kh * kw * 1 * f + f + 2 * f                 # conv + bias + bn
    block = 2 * (9 * f * f + f) + 2 * (2 * f)          # two convs + two bns
    tkh, tkw = cfg.trans_kernel
    trans = tkh * tkw * f * f + f + 2 * f
    head = kh * kw * f * 1 + 1
    return stem + cfg.residual_blocks * block + trans + head


# --- build -----------------------------------------------------------------------

def test_build_parameter_count_matches_closed_form():
    for cfg in (TINY, SMALL, UpsamplerConfig(residual_blocks=3, base_filters=12),
                UpsamplerConfig()):  # the full 16-block, 64-filter stack
        w = build_upsampler(cfg, seed=0)
        total = sum(int(np.prod(t.data.shape)) for t in w.parameters())
        assert total == expected_parameter_count(cfg)


def test_full_scale_network_forward_shape():
    w = build_upsampler(UpsamplerConfig(), seed=0)
    out = forward(w, np.random.default_rng(0).uniform(0, 80, (16, 128)))
    assert out.shape == (32, 128)


def test_build_smallest_variant():
    w = build_upsampler(TINY, seed=1)
    out = forward(w, np.zeros((8, 16)))
    assert out.shape == (16, 16)


def test_build_deterministic():
    a = build_upsampler(SMALL, seed=7)
    b = build_upsampler(SMALL, seed=7)
    for name in a.tensors:
        np.testing.assert_array_equal(a.tensors[name].data, b.tensors[name].data)


def test_build_seed_changes_weights():
    a = build_upsampler(TINY, seed=0)
    b = build_upsampler(TINY, seed=1)
    assert np.abs(a.tensors["stem.conv.kernel"].data
                  - b.tensors["stem.conv.kernel"].data).max() > 0


def test_bad_config_rejected():
    with pytest.raises(BadConfig):
        UpsamplerConfig(residual_blocks=0)
    with pytest.raises(BadConfig):
        UpsamplerConfig(trans_kernel=(3, 1))  # cannot give exact 2x
    with pytest.raises(BadConfig):
        UpsamplerConfig(trans_stride=(3, 1))


# --- forward ---------------------------------------------------------------------

@pytest.mark.parametrize("h", [8, 16, 32])
def test_forward_doubles_rows(h):
    w = build_upsampler(TINY, seed=0)
    out = forward(w, np.random.default_rng(0).uniform(0, 50, (h, 32)))
    assert out.shape == (2 * h, 32)


def test_forward_resolution_transfer():
    """Weights built for one resolution run at another (fully convolutional)."""
    w = build_upsampler(SMALL, seed=0)
    a = forward(w, np.random.default_rng(0).uniform(0, 50, (16, 128)))
    b = forward(w, np.random.default_rng(0).uniform(0, 50, (32, 256)))
    assert a.shape == (32, 128) and b.shape == (64, 256)


def test_forward_zero_head_gives_zero_output(rng):
    w = build_upsampler(TINY, seed=0)
    w.tensors["head.conv.kernel"].data = np.zeros_like(
        w.tensors["head.conv.kernel"].data)
    w.tensors["head.conv.bias"].data = np.zeros_like(
        w.tensors["head.conv.bias"].data)
    out = forward(w, rng.uniform(0, 50, (8, 16)))
    np.testing.assert_array_equal(out, np.zeros((16, 16)))


def test_forward_rejects_small_input():
    w = build_upsampler(TINY, seed=0)
    with pytest.raises(InputTooSmall):
        forward(w, np.zeros((4, 32)))
    with pytest.raises(InputTooSmall):
        forward(w, np.zeros((8, 8)))


def test_forward_rejects_nonfinite():
    w = build_upsampler(TINY, seed=0)
    x = np.zeros((8, 16))
    x[0, 0] = np.nan
    with pytest.raises(InputTooSmall):
        forward(w, x)


def test_forward_deterministic(rng):
    w = build_upsampler(SMALL, seed=0)
    x = rng.uniform(0, 60, (16, 64))
    np.testing.assert_array_equal(forward(w, x), forward(w, x))


def test_forward_column_shift_equivariance(rng):
    """Circular column shifts commute with eval-mode forward away from
    the zero-padded boundary and the wrap seam (receptive-field margin)."""
    cfg = SMALL
    w = build_upsampler(cfg, seed=3)
    x = rng.uniform(0, 50, (16, 96))
    k = 11
    y_shift = forward(w, np.roll(x, k, axis=1))
    y_base = np.roll(forward(w, x), k, axis=1)
    # stem 9x9 (4) + blocks 2x(3x3) (2 each) + head 9x9 (4)
    margin = 4 + 2 * cfg.residual_blocks + 4
    cols = np.arange(96)
    near_edge = (cols < margin) | (cols >= 96 - margin)
    seam = ((cols - k) % 96 < margin) | ((cols - k) % 96 >= 96 - margin)
    interior = ~(near_edge | seam)
    assert interior.sum() > 30
    np.testing.assert_allclose(y_shift[:, interior], y_base[:, interior],
                               atol=1e-9)


def test_forward_batch_training_mode(rng):
    w = build_upsampler(TINY, seed=0)
    x = Tensor(rng.uniform(0, 40, (3, 1, 8, 16)))
    out = forward_tensor(w, x, training=True)
    assert out.shape == (3, 1, 16, 16)
    loss = ad.tsum(ad.absolute(out))
    ad.backward(loss)
    assert all(p.grad is not None for p in w.parameters())


# --- checkpoints --------------------------------------------------------------------

def test_save_load_round_trip(tmp_path, rng):
    w = build_upsampler(SMALL, seed=5)
    path = tmp_path / "model.lwt"
    save_weights(w, path)
    loaded = load_weights(path)
    x = rng.uniform(0, 50, (16, 64)).astype(np.float32).astype(np.float64)
    a = forward(w.astype(np.float32).astype(np.float64), x)
    b = forward(loaded, x)
    np.testing.assert_array_equal(
        np.asarray(a, dtype=np.float32), np.asarray(b, dtype=np.float32))


def test_load_truncated_file(tmp_path):
    w = build_upsampler(TINY, seed=0)
    path = tmp_path / "model.lwt"
    save_weights(w, path)
    path.write_bytes(path.read_bytes()[:-9])
    with pytest.raises(CorruptFile):
        load_weights(path)


def test_load_extra_tensor_reports_name(tmp_path):
    w = build_upsampler(TINY, seed=0)
    path = tmp_path / "model.lwt"
    tensors = {n: t.data for n, t in w.tensors.items()}
    tensors["sneaky.extra"] = np.zeros(3)
    ad.save_tensors(path, tensors)
    save_weights(w, tmp_path / "sidecar_source.lwt")  # only for the manifest
    (tmp_path / "model.lwt.json").write_text(
        (tmp_path / "sidecar_source.lwt.json").read_text())
    with pytest.raises(ShapeMismatchVsConfig) as exc:
        load_weights(path)
    assert exc.value.name == "sneaky.extra"


def test_load_missing_tensor_reports_name(tmp_path):
    w = build_upsampler(TINY, seed=0)
    path = tmp_path / "model.lwt"
    tensors = {n: t.data for n, t in w.tensors.items()}
    tensors.pop("head.conv.bias")
    ad.save_tensors(path, tensors)
    with pytest.raises(ShapeMismatchVsConfig) as exc:
        load_weights(path, config=TINY)
    assert exc.value.name == "head.conv.bias"


def test_load_wrong_shape_reports_name(tmp_path):
    w = build_upsampler(TINY, seed=0)
    path = tmp_path / "model.lwt"
    tensors = {n: t.data for n, t in w.tensors.items()}
    tensors["stem.conv.bias"] = np.zeros(7)
    ad.save_tensors(path, tensors)
    with pytest.raises(ShapeMismatchVsConfig) as exc:
        load_weights(path, config=TINY)
    assert exc.value.name == "stem.conv.bias"


def test_astype_round_trip_keeps_buffers_float64():
    w = build_upsampler(TINY, seed=0).astype(np.float32)
    assert w.tensors["stem.conv.kernel"].data.dtype == np.float32
    assert w.tensors["stem.bn.running_mean"].data.dtype == np.float64

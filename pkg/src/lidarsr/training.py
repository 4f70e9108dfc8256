"""Training loops for the up-sampler and the feature extractor, plus the
evaluation harness shared by networks and classical baselines.

Checkpoint selection keeps the weights with the lowest validation error:
masked MAE for the L1 / perceptual / semantic-consistency objectives and
masked MSE for the L2 objective, so each network is judged on its own
error family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .baselines import METHODS, interpolate
from .datapipe import make_pair
from .errors import BadConfig, EmptyDataset, MissingExtractor, MissingLabels
from .extractor import (
    ExtractorConfig,
    ExtractorWeights,
    build_extractor,
    predict_labels,
)
from .geometry import DistanceImage, to_network_raster
from .losses import (
    SCLossState,
    masked_pointwise_loss,
    perceptual_loss,
    semantic_consistency_loss,
)
from .metrics import ErrorAccumulator, MetricsReport, confusion_matrix, miou_from_confusion
from .upsampler import UpsamplerConfig, UpsamplerWeights, build_upsampler, forward_tensor

LOSS_SELECTORS = ("l1", "l2", "feat0", "feat1", "feat2", "feat3", "sc")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "l1"
    batch_size: int = 4
    iterations: int = 2000
    eval_interval: int = 100
    seed: int = 0
    learning_rate: float = 1e-4
    lr_halflife: int = 0  # steps for the rate to halve; 0 keeps it constant
    split: tuple = (0.62, 0.13, 0.25)

    def __post_init__(self):
        object.__setattr__(self, "split", tuple(self.split))
        if self.loss not in LOSS_SELECTORS:
            raise BadConfig(f"loss must be one of {LOSS_SELECTORS}, got {self.loss!r}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise BadConfig(f"split fractions must sum to 1, got {self.split}")
        if self.batch_size < 1 or self.iterations < 1 or self.eval_interval < 1:
            raise BadConfig("batch_size, iterations, eval_interval must be >= 1")
        if self.learning_rate <= 0:
            raise BadConfig("learning_rate must be positive")
        if self.lr_halflife < 0:
            raise BadConfig("lr_halflife must be >= 0")


def _prep_frames(frames, dtype=np.float64):
    """Precompute per frame: input raster, gt ranges/valid/labels, and the
    dense gt raster (d* = 0) the extractor consumes."""
    prepped = []
    for high in frames:
        low, _ = make_pair(high)
        prepped.append((to_network_raster(low).astype(dtype),
                        high.ranges.astype(dtype), high.valid,
                        high.labels, to_network_raster(high).astype(dtype)))
    return prepped


def prediction_to_image(pred: np.ndarray, geometry) -> DistanceImage:
    """Wrap a network output raster on the given high-resolution grid.

    Nonpositive predictions are treated as missing; values above max_range
    clamp to it.
    """
    valid = pred > 0
    ranges = np.where(valid, np.minimum(pred, geometry.max_range), 0.0)
    return DistanceImage(ranges=ranges, valid=valid, geometry=geometry)


def _validation_errors(weights, frames_prepped, gt_frames):
    acc = ErrorAccumulator()
    with ad.no_grad():
        for prep, gt in zip(frames_prepped, gt_frames):
            out = forward_tensor(weights, Tensor(prep[0][None, None]),
                                 training=False)
            acc.update(prediction_to_image(out.data[0, 0], gt.geometry), gt)
    return acc.result()  # (mse, mae)


def train_upsampler(config: TrainConfig, train_frames, val_frames=None, *,
                    net_config: UpsamplerConfig | None = None,
                    extractor: ExtractorWeights | None = None,
                    init_weights: UpsamplerWeights | None = None,
                    target_train_mae: float | None = None,
                    dtype=np.float32):
    """Adam-train the up-sampler with the selected objective.

    ``train_frames`` / ``val_frames`` hold high-resolution DistanceImages;
    pairs are built by even-parity decimation. Perceptual and
    semantic-consistency objectives require a pre-trained ``extractor``
    (its tensors stay frozen) and usually ``init_weights`` from a converged
    L1 run. The graph runs in ``dtype`` (float32 by default; Adam always
    accumulates in float64). Returns (best weights, log) with one log entry
    per eval interval; fixed seeds give identical logs.
    """
    if not train_frames:
        raise EmptyDataset("training needs at least one frame")
    needs_extractor = config.loss.startswith("feat") or config.loss == "sc"
    if needs_extractor and extractor is None:
        raise MissingExtractor(
            f"loss {config.loss!r} needs a pre-trained feature extractor")
    if needs_extractor:
        if any(t.data.dtype != dtype for t in extractor.parameters()):
            extractor = extractor.astype(dtype)
        extractor.freeze()
    if config.loss == "sc" and any(f.labels is None for f in train_frames):
        raise MissingLabels("semantic-consistency training needs labeled frames")

    rng = np.random.default_rng(config.seed)
    if init_weights is not None:
        weights = init_weights.astype(dtype)
    else:
        weights = build_upsampler(net_config or UpsamplerConfig(),
                                  seed=config.seed).astype(dtype)
    if val_frames is None:
        val_frames = train_frames

    train_prepped = _prep_frames(train_frames, dtype)
    val_prepped = _prep_frames(val_frames, dtype)

    tap = int(config.loss[4:]) if config.loss.startswith("feat") else None
    gt_feats = None
    if tap is not None:
        with ad.no_grad():
            gt_feats = [extractor.features_t(Tensor(p[4][None, None]), tap).data
                        for p in train_prepped]

    sc_state = SCLossState() if config.loss == "sc" else None
    params = weights.parameters()
    if sc_state is not None:
        params = params + sc_state.parameters()
    opt = Adam(params, lr=config.learning_rate)

    key = "mse" if config.loss == "l2" else "mae"
    best = None
    best_weights = weights.copy()
    log = []

    for step in range(1, config.iterations + 1):
        if config.lr_halflife:
            opt.state.lr = config.learning_rate * 0.5 ** (step / config.lr_halflife)
        idx = rng.integers(0, len(train_prepped), size=config.batch_size)
        xin = np.stack([train_prepped[i][0] for i in idx])[:, None]
        gt = np.stack([train_prepped[i][1] for i in idx])[:, None]
        gvalid = np.stack([train_prepped[i][2] for i in idx])[:, None]

        pred = forward_tensor(weights, Tensor(xin), training=True)
        if config.loss in ("l1", "l2"):
            loss = masked_pointwise_loss(pred, gt, gvalid,
                                         alpha=1 if config.loss == "l1" else 2)
        elif tap is not None:
            gfb = np.concatenate([gt_feats[i] for i in idx], axis=0)
            loss = ad.mul(perceptual_loss(pred, None, extractor, tap,
                                          gt_features=gfb),
                          1.0 / config.batch_size)
        else:
            labels = np.stack([train_prepped[i][3] for i in idx])
            loss = semantic_consistency_loss(pred, gt, gvalid, labels,
                                             extractor, sc_state)

        opt.zero_grad()
        ad.backward(loss)
        opt.step()

        if step % config.eval_interval == 0 or step == config.iterations:
            mse, mae = _validation_errors(weights, val_prepped, val_frames)
            entry = {"step": step, "train_loss": loss.item(),
                     "val_mae": mae, "val_mse": mse}
            if sc_state is not None:
                entry["sigma_r"] = sc_state.sigma_r
                entry["sigma_c"] = sc_state.sigma_c
            log.append(entry)
            metric = entry[f"val_{key}"]
            if best is None or metric < best:
                best = metric
                best_weights = weights.copy()
            if target_train_mae is not None:
                tmse, tmae = _validation_errors(weights, train_prepped,
                                                train_frames)
                entry["train_mae"] = tmae
                if tmae <= target_train_mae:
                    break
    return best_weights, log


def train_extractor(frames, *, config: ExtractorConfig | None = None,
                    iterations: int = 400, batch_size: int = 2,
                    learning_rate: float = 1e-3, seed: int = 0,
                    eval_interval: int = 50,
                    target_accuracy: float | None = None,
                    dtype=np.float32):
    """Cross-entropy pre-training of the segmentation net on labeled frames.

    Returns (weights, log); the log tracks train pixel accuracy. The
    returned weights are frozen, ready for loss usage.
    """
    usable = [f for f in frames
              if f.labels is not None and (f.labels != 255).any()]
    if not usable:
        raise MissingLabels("extractor training needs labeled frames")
    weights = build_extractor(config or ExtractorConfig(), seed=seed).astype(dtype)
    weights.trainable()
    rng = np.random.default_rng(seed)
    inputs = [to_network_raster(f).astype(dtype) for f in usable]
    targets = [f.labels for f in usable]
    opt = Adam(weights.parameters(), lr=learning_rate)
    log = []
    for step in range(1, iterations + 1):
        idx = rng.integers(0, len(usable), size=batch_size)
        x = Tensor(np.stack([inputs[i] for i in idx])[:, None])
        y = np.stack([targets[i] for i in idx])
        logits = weights.logits_t(x, training=True)
        loss = ad.cross_entropy(logits, y, ignore_id=255)
        opt.zero_grad()
        ad.backward(loss)
        opt.step()
        if step % eval_interval == 0 or step == iterations:
            acc = pixel_accuracy(weights, usable)
            log.append({"step": step, "train_loss": loss.item(), "accuracy": acc})
            if target_accuracy is not None and acc >= target_accuracy:
                break
    return weights.freeze(), log


def pixel_accuracy(weights: ExtractorWeights, frames):
    hits = total = 0
    with ad.no_grad():
        for f in frames:
            pred = predict_labels(weights, to_network_raster(f))
            keep = f.labels != weights.catalog.ignore_id
            hits += int((pred[keep] == f.labels[keep]).sum())
            total += int(keep.sum())
    return hits / total if total else 0.0


def evaluate(testset, candidate, *, extractor: ExtractorWeights | None = None
             ) -> MetricsReport:
    """Masked MAE/MSE (and mIoU when an extractor is given) over a test set.

    ``candidate`` is 'gt', one of the interpolation baselines, or trained
    UpsamplerWeights; the low-resolution input is always the even-parity
    decimation of each ground-truth frame.
    """
    if not testset:
        raise EmptyDataset("evaluation needs at least one frame")
    acc = ErrorAccumulator()
    num_classes = extractor.config.num_classes if extractor is not None else 0
    conf = np.zeros((num_classes, num_classes), dtype=np.int64) \
        if extractor is not None else None
    with ad.no_grad():
        for gt in testset:
            low, _ = make_pair(gt)
            if isinstance(candidate, UpsamplerWeights):
                out = forward_tensor(candidate,
                                     Tensor(to_network_raster(low)[None, None]),
                                     training=False)
                pred = prediction_to_image(out.data[0, 0], gt.geometry)
            elif candidate == "gt":
                pred = gt
            elif candidate in METHODS:
                pred = interpolate(low, candidate, geometry=gt.geometry)
            else:
                raise ValueError(f"unknown candidate {candidate!r}")
            acc.update(pred, gt)
            if conf is not None and gt.labels is not None:
                pl = predict_labels(extractor, to_network_raster(pred))
                conf += confusion_matrix(pl, gt.labels, num_classes,
                                         extractor.catalog.ignore_id)
    mse, mae = acc.result()
    miou_val = per_class = None
    if conf is not None and conf.sum() > 0:
        miou_val, per_class = miou_from_confusion(conf)
        per_class = [None if np.isnan(v) else v for v in per_class]
    return MetricsReport(mse=mse, mae=mae, miou=miou_val,
                         per_class_iou=per_class, frames=acc.frames)

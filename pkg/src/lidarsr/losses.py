"""Training objectives: masked point-wise, perceptual, semantic-consistency.

All three return scalar graph tensors differentiable w.r.t. the prediction.
Ground truth, masks, and label rasters enter as constants. The
semantic-consistency balance terms sigma_r / sigma_c are trained as
log-sigma so they stay positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EmptyValidSet, ShapeMismatch, TapOutOfRange

cross_entropy = ad.cross_entropy


def _as_graph_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def masked_pointwise_loss(pred, gt, valid, alpha: int) -> Tensor:
    """(1 / (alpha * |V|)) * sum over valid cells of |gt - pred|^alpha.

    alpha=1 is the mean absolute error, alpha=2 half the mean squared error.
    Cells outside the valid set contribute nothing, whatever their values.
    """
    if alpha not in (1, 2):
        raise ValueError(f"alpha must be 1 or 2, got {alpha}")
    pred = _as_graph_tensor(pred)
    gt = np.asarray(gt, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if pred.shape != gt.shape or valid.shape != gt.shape:
        raise ShapeMismatch(
            f"pred {pred.shape}, gt {gt.shape}, valid {valid.shape} must match")
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptyValidSet("masked loss needs at least one valid cell")
    diff = ad.mul(ad.sub(pred, gt), valid.astype(np.float64))
    total = ad.tsum(ad.absolute(diff) if alpha == 1 else ad.square(diff))
    return ad.mul(total, 1.0 / (alpha * n_valid))


def perceptual_loss(pred, gt, extractor, tap: int, gt_features=None) -> Tensor:
    """L1 distance between fixed-extractor feature maps of pred and gt.

    No validity masking: the extractor labels missing inputs from context.
    ``extractor`` is anything exposing ``features_t(x, tap)``; its tensors
    must not require grad. ``gt_features`` short-circuits the ground-truth
    forward when the caller has it precomputed.
    """
    if tap not in (0, 1, 2, 3):
        raise TapOutOfRange(f"tap must be in 0..3, got {tap}")
    pred = _as_graph_tensor(pred)
    if pred.data.ndim == 2:
        x = _reshape_nchw(pred)
    elif pred.data.ndim == 4:
        x = pred
    else:
        raise ShapeMismatch(f"pred must be HxW or NCHW, got {pred.shape}")
    feat_pred = extractor.features_t(x, tap)
    if gt_features is None:
        gt = np.asarray(gt, dtype=np.float64)
        if gt.ndim == 2:
            gt = gt[None, None]
        if gt.shape != x.shape:
            raise ShapeMismatch(f"gt {gt.shape} does not match pred {x.shape}")
        gt_features = extractor.features_t(Tensor(gt), tap).data
    gt_features = np.asarray(gt_features, dtype=np.float64)
    if gt_features.shape != feat_pred.shape:
        raise ShapeMismatch(
            f"gt features {gt_features.shape} != pred features {feat_pred.shape}")
    return ad.tsum(ad.absolute(ad.sub(feat_pred, gt_features)))


def _reshape_nchw(t: Tensor) -> Tensor:
    """View an HxW graph tensor as (1,1,H,W) without breaking the chain."""
    h, w = t.shape
    out = Tensor(t.data.reshape(1, 1, h, w))
    if t.requires_grad or t._backward is not None:
        out.requires_grad = True
        out._parents = (t,)

        def bwd(g, acc):
            acc(t, g.reshape(h, w))

        out._backward = bwd
    return out


@dataclass
class SCLossState:
    """Trainable log-sigma balances of the semantic-consistency loss."""

    log_sigma_r: Tensor = field(
        default_factory=lambda: Tensor(np.float64(0.0), requires_grad=True))
    log_sigma_c: Tensor = field(
        default_factory=lambda: Tensor(np.float64(0.0), requires_grad=True))

    @property
    def sigma_r(self):
        return float(np.exp(self.log_sigma_r.data))

    @property
    def sigma_c(self):
        return float(np.exp(self.log_sigma_c.data))

    def parameters(self):
        return [self.log_sigma_r, self.log_sigma_c]


def semantic_consistency_loss(pred, gt, valid, gt_labels, extractor,
                              state: SCLossState, ignore_id: int = 255) -> Tensor:
    """Uncertainty-weighted sum of masked L1 and segmentation cross-entropy.

    loss = L1 / (2 sigma_r) + log sigma_r + CE / sigma_c + log sigma_c,
    where CE compares extractor logits on the prediction against the
    ground-truth labels. Gradients reach pred and both log-sigma tensors;
    the extractor stays fixed.
    """
    pred = _as_graph_tensor(pred)
    l1 = masked_pointwise_loss(pred, gt, valid, alpha=1)
    x = _reshape_nchw(pred) if pred.data.ndim == 2 else pred
    logit = extractor.logits_t(x)
    labels = np.asarray(gt_labels)
    if labels.ndim == 2 and logit.data.ndim == 4:
        labels = labels[None]
    ce = ad.cross_entropy(logit, labels, ignore_id=ignore_id)
    inv_sr = ad.exp(ad.neg(state.log_sigma_r))
    inv_sc = ad.exp(ad.neg(state.log_sigma_c))
    return ad.add(
        ad.add(ad.mul(ad.mul(l1, inv_sr), 0.5), state.log_sigma_r),
        ad.add(ad.mul(ce, inv_sc), state.log_sigma_c))

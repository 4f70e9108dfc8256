"""Quantitative evaluation: masked MAE/MSE, mIoU, MOS aggregation.

Errors average over cells valid in the ground truth AND in the prediction;
MSE is reported as the plain mean of squared deviations in m^2 (no 1/alpha
prefactor). mIoU averages per-class IoU over the classes present in the
ground truth. MOS aggregation tallies blinded 1-5 ratings per method.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadClassId,
    DuplicateVote,
    EmptyOverlap,
    ShapeMismatch,
)
from .geometry import DistanceImage


@dataclass
class MetricsReport:
    mse: float
    mae: float
    miou: float | None = None
    per_class_iou: list | None = None
    frames: int = 0

    def __post_init__(self):
        if self.mae < 0 or self.mse < 0:
            raise ValueError("errors must be non-negative")
        if self.miou is not None and not (0.0 <= self.miou <= 1.0):
            raise ValueError(f"miou must lie in [0, 1], got {self.miou}")

    def to_json(self):
        return json.dumps({
            "mse": self.mse,
            "mae": self.mae,
            "miou": self.miou,
            "per_class_iou": self.per_class_iou,
            "frames": self.frames,
        }, indent=2) + "\n"

    @staticmethod
    def from_json(text):
        d = json.loads(text)
        return MetricsReport(mse=d["mse"], mae=d["mae"], miou=d["miou"],
                             per_class_iou=d["per_class_iou"], frames=d["frames"])


def masked_errors(pred: DistanceImage, gt: DistanceImage):
    """(mse, mae) over cells valid in both images, in m^2 and m."""
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    overlap = pred.valid & gt.valid
    n = int(overlap.sum())
    if n == 0:
        raise EmptyOverlap("no cell is valid in both prediction and ground truth")
    delta = pred.ranges[overlap] - gt.ranges[overlap]
    return float((delta * delta).mean()), float(np.abs(delta).mean())


class ErrorAccumulator:
    """Streaming masked MAE/MSE over many frames (global cell average)."""

    def __init__(self):
        self.abs_sum = 0.0
        self.sq_sum = 0.0
        self.count = 0
        self.frames = 0

    def update(self, pred: DistanceImage, gt: DistanceImage):
        if pred.shape != gt.shape:
            raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
        overlap = pred.valid & gt.valid
        delta = pred.ranges[overlap] - gt.ranges[overlap]
        self.abs_sum += float(np.abs(delta).sum())
        self.sq_sum += float((delta * delta).sum())
        self.count += int(overlap.sum())
        self.frames += 1

    def result(self):
        if self.count == 0:
            raise EmptyOverlap("no overlapping valid cells across the set")
        return self.sq_sum / self.count, self.abs_sum / self.count


def confusion_matrix(pred_labels, gt_labels, num_classes, ignore_id=255):
    """num_classes x num_classes confusion counts over non-ignored gt cells."""
    pred = np.asarray(pred_labels).ravel().astype(np.int64)
    gt = np.asarray(gt_labels).ravel().astype(np.int64)
    if pred.shape != gt.shape:
        raise ShapeMismatch("label rasters differ in shape")
    keep = gt != ignore_id
    pred, gt = pred[keep], gt[keep]
    if ((gt < 0) | (gt >= num_classes)).any():
        raise BadClassId("ground-truth label outside the class range")
    if ((pred < 0) | (pred >= num_classes)).any():
        raise BadClassId("predicted label outside the class range")
    return np.bincount(gt * num_classes + pred,
                       minlength=num_classes * num_classes
                       ).reshape(num_classes, num_classes)


def miou_from_confusion(conf):
    """(miou, per-class IoU list) averaging over classes present in gt.

    Classes absent from the ground truth get IoU NaN and do not enter the
    mean.
    """
    conf = np.asarray(conf, dtype=np.float64)
    tp = np.diag(conf)
    fn = conf.sum(axis=1) - tp
    fp = conf.sum(axis=0) - tp
    present = (tp + fn) > 0
    denom = tp + fp + fn
    iou = np.full(conf.shape[0], np.nan)
    nz = present & (denom > 0)
    iou[nz] = tp[nz] / denom[nz]
    if not present.any():
        return 0.0, iou.tolist()
    return float(np.nanmean(iou[present])), iou.tolist()


def miou(pred_labels, gt_labels, num_classes, ignore_id=255):
    conf = confusion_matrix(pred_labels, gt_labels, num_classes, ignore_id)
    return miou_from_confusion(conf)


# --- mean opinion score -------------------------------------------------------

@dataclass(frozen=True)
class RatingRecord:
    """One blinded human judgment."""

    subject: str
    scene: str
    method: str  # blinded alias until de-blinded by the survey manifest
    score: int
    timestamp: str = ""

    def __post_init__(self):
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"score must be an integer 1..5, got {self.score}")


@dataclass
class MethodScore:
    counts: dict = field(default_factory=lambda: {s: 0 for s in range(1, 6)})
    votes: int = 0

    @property
    def mean(self):
        if self.votes == 0:
            return 0.0
        return sum(s * c for s, c in self.counts.items()) / self.votes


def mos_aggregate(records):
    """Per-method score distributions plus completeness holes.

    Returns (scores: {method: MethodScore}, holes: list of missing
    (subject, scene, method) triples over the full subject x scene x method
    matrix observed in the records). Raises DuplicateVote on a repeated
    (subject, scene, method) triple.
    """
    scores = {}
    seen = set()
    subjects, scenes, methods = set(), set(), set()
    for rec in records:
        key = (rec.subject, rec.scene, rec.method)
        if key in seen:
            raise DuplicateVote(*key)
        seen.add(key)
        subjects.add(rec.subject)
        scenes.add(rec.scene)
        methods.add(rec.method)
        ms = scores.setdefault(rec.method, MethodScore())
        ms.counts[rec.score] += 1
        ms.votes += 1
    holes = [(subj, scene, meth)
             for subj in sorted(subjects)
             for scene in sorted(scenes)
             for meth in sorted(methods)
             if (subj, scene, meth) not in seen]
    return scores, holes


def parse_ratings_jsonl(text):
    """JSON-lines ratings; blank lines and '#' comment lines are skipped."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"ratings line {lineno}: {e}") from None
        records.append(RatingRecord(
            subject=str(d["subject"]), scene=str(d["scene"]),
            method=str(d["method"]), score=int(d["score"]),
            timestamp=str(d.get("timestamp", ""))))
    return records

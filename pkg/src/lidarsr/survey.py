"""Mean-opinion-score study preparation and aggregation.

``survey_prepare`` renders every scene under every candidate method to a
binary PLY point cloud, blinds the methods behind random alias tokens,
fixes a randomized presentation order per subject, and writes anchor
examples for the best (ground truth) and worst (jittered nearest
interpolation) rating categories. ``survey_aggregate`` de-blinds collected
JSON-lines ratings and reports per-method score distributions and MOS.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .baselines import METHODS, interpolate
from .datapipe import make_pair
from .errors import UnknownAlias
from .geometry import DistanceImage, back_project, to_network_raster
from .metrics import RatingRecord, mos_aggregate, parse_ratings_jsonl
from .training import prediction_to_image
from .upsampler import UpsamplerWeights, forward_tensor

# No 'g' so a token can never contain the method name "gt" as a substring.
_ALIAS_ALPHABET = "abcdefhjkmnpqrstuvwxyz23456789"


def write_ply(cloud, path, with_classes=False):
    """Binary little-endian PLY with float32 x/y/z (+ optional uchar class)."""
    pts = np.asarray(cloud.points, dtype="<f4")
    n = pts.shape[0]
    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {n}",
              "property float x", "property float y", "property float z"]
    if with_classes and cloud.labels is not None:
        header.append("property uchar class")
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if with_classes and cloud.labels is not None:
            rec = np.zeros(n, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                                     ("c", "u1")])
            rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
            rec["c"] = cloud.labels
            f.write(rec.tobytes())
        else:
            f.write(pts.tobytes())


def read_ply(path):
    """Parse the PLY files this module writes; returns (points, classes|None)."""
    blob = Path(path).read_bytes()
    end = blob.index(b"end_header\n") + len(b"end_header\n")
    lines = blob[:end].decode("ascii").splitlines()
    n = 0
    props = []
    for line in lines:
        if line.startswith("element vertex "):
            n = int(line.split()[2])
        elif line.startswith("property"):
            props.append(line.split()[2])
    has_class = "class" in props
    dtype = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if has_class:
        dtype.append(("c", "u1"))
    rec = np.frombuffer(blob[end:], dtype=dtype, count=n)
    pts = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    return pts, (rec["c"].copy() if has_class else None)


def _render(method, weights_by_method, low: DistanceImage, gt: DistanceImage):
    if method == "gt":
        return gt
    if method in METHODS:
        return interpolate(low, method, geometry=gt.geometry)
    weights = weights_by_method.get(method)
    if not isinstance(weights, UpsamplerWeights):
        raise ValueError(f"method {method!r} needs up-sampler weights")
    with ad.no_grad():
        out = forward_tensor(weights, Tensor(to_network_raster(low)[None, None]),
                             training=False)
    return prediction_to_image(out.data[0, 0], gt.geometry)


def _degraded_anchor(low: DistanceImage, gt: DistanceImage, rng) -> DistanceImage:
    """Category-one anchor: nearest interpolation with random row jitter."""
    img = interpolate(low, "nearest", geometry=gt.geometry)
    ranges = img.ranges.copy()
    jitter = rng.uniform(0.6, 1.4, size=ranges.shape)
    ranges[1::2] *= jitter[1::2]
    ranges = np.clip(ranges, 0.0, gt.geometry.max_range)
    valid = img.valid & (ranges > 0)
    return DistanceImage(ranges=np.where(valid, ranges, 0.0), valid=valid,
                         geometry=img.geometry)


def survey_prepare(scenes, methods, seed, out_dir, *, subjects=3,
                   weights_by_method=None):
    """Blind, render, and order the study stimuli; returns the manifest.

    ``scenes`` are high-resolution ground-truth frames; ``methods`` name
    'gt', baselines, or keys into ``weights_by_method``. One PLY per
    scene x method is written under ``out_dir``/ply plus two anchors. The
    manifest maps alias tokens back to method names and records one
    shuffled instance order per subject.
    """
    if len(scenes) < 1 or len(methods) < 2:
        raise ValueError("need at least one scene and two methods")
    if len(set(methods)) != len(methods):
        raise ValueError("methods must be unique")
    out_dir = Path(out_dir)
    (out_dir / "ply").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    weights_by_method = weights_by_method or {}

    aliases = {}
    for method in methods:
        while True:
            token = "".join(rng.choice(list(_ALIAS_ALPHABET), size=6))
            if token not in aliases:
                break
        aliases[token] = method

    instances = []
    for si, gt in enumerate(scenes):
        scene_id = f"scene_{si:03d}"
        low, _ = make_pair(gt)
        for token, method in aliases.items():
            img = _render(method, weights_by_method, low, gt)
            rel = f"ply/{scene_id}_{token}.ply"
            write_ply(back_project(img), out_dir / rel)
            instances.append({"id": f"{scene_id}/{token}", "scene": scene_id,
                              "alias": token, "file": rel})

    gt0 = scenes[0]
    low0, _ = make_pair(gt0)
    write_ply(back_project(gt0), out_dir / "ply" / "anchor_five.ply")
    write_ply(back_project(_degraded_anchor(low0, gt0, rng)),
              out_dir / "ply" / "anchor_one.ply")

    subject_ids = ([f"subject_{k:02d}" for k in range(subjects)]
                   if isinstance(subjects, int) else [str(s) for s in subjects])
    orders = {}
    for k, sid in enumerate(subject_ids):
        sub_rng = np.random.default_rng(np.random.SeedSequence([int(seed), k]))
        orders[sid] = [instances[i]["id"]
                       for i in sub_rng.permutation(len(instances))]

    manifest = {
        "version": 1,
        "seed": int(seed),
        "scenes": [f"scene_{si:03d}" for si in range(len(scenes))],
        "methods": aliases,
        "instances": instances,
        "orders": orders,
        "anchors": {"five": "ply/anchor_five.ply", "one": "ply/anchor_one.ply"},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                           encoding="utf-8")
    return manifest


def survey_aggregate(ratings_texts, manifest):
    """De-blind ratings and aggregate per-method MOS.

    ``ratings_texts`` is an iterable of JSON-lines payloads (one per
    ratings file). Returns a dict with per-method distributions, means,
    vote counts, and completeness warnings (missing subject/scene/method
    combinations against the manifest's instance set).
    """
    alias_map = manifest["methods"]
    records = []
    for text in ratings_texts:
        for rec in parse_ratings_jsonl(text):
            if rec.method not in alias_map:
                raise UnknownAlias(f"alias {rec.method!r} not in the manifest")
            records.append(rec)

    deblinded = [RatingRecord(subject=r.subject, scene=r.scene,
                              method=alias_map[r.method], score=r.score,
                              timestamp=r.timestamp) for r in records]
    scores, _ = mos_aggregate(deblinded)

    expected = {(inst["scene"], inst["alias"]) for inst in manifest["instances"]}
    seen_subjects = sorted({r.subject for r in records})
    missing = []
    for subj in seen_subjects:
        have = {(r.scene, r.method) for r in records if r.subject == subj}
        for scene, alias in sorted(expected - have):
            missing.append({"subject": subj, "scene": scene,
                            "method": alias_map[alias]})

    return {
        "methods": {
            m: {"mos": s.mean, "votes": s.votes,
                "distribution": {str(k): v for k, v in sorted(s.counts.items())}}
            for m, s in sorted(scores.items())
        },
        "subjects": seen_subjects,
        "incomplete": missing,
    }

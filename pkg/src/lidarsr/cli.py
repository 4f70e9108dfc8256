"""Command-line surface.

Subcommands: simulate, project, decimate, train-upsampler, train-extractor,
upsample, evaluate, survey-prepare, survey-aggregate. Failures exit nonzero
after printing one machine-readable JSON error line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .baselines import METHODS, doubled_elevations
from .datapipe import ingest_bin, split_dataset, synthesize_dataset
from .errors import LidarSRError
from .extractor import ExtractorConfig, load_extractor, save_extractor
from .geometry import (
    SensorGeometry,
    build_sensor,
    decimate,
    read_ldi,
    to_network_raster,
    write_ldi,
)
from .survey import survey_aggregate, survey_prepare
from .training import (
    TrainConfig,
    evaluate,
    prediction_to_image,
    train_extractor,
    train_upsampler,
)
from .upsampler import (
    UpsamplerConfig,
    forward_tensor,
    load_weights,
    save_weights,
)

DEFAULT_GEOMETRY = {"layers": 32, "elevation_span": [-0.42, 0.08],
                    "azimuth_count": 256, "max_range": 100.0}


def load_geometry(path=None) -> SensorGeometry:
    """Geometry from a JSON file: explicit elevations or a uniform span."""
    spec = DEFAULT_GEOMETRY if path is None else json.loads(
        Path(path).read_text(encoding="utf-8"))
    if "elevations" in spec:
        elev = np.asarray(spec["elevations"], dtype=np.float64)
    else:
        lo, hi = spec["elevation_span"]
        elev = np.linspace(lo, hi, int(spec["layers"]))
    return build_sensor(elev, int(spec["azimuth_count"]),
                        float(spec.get("max_range", 100.0)))


def load_config(path=None, **overrides) -> dict:
    """Config file as JSON or key=value lines, merged with CLI overrides."""
    out = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8").strip()
        if text.startswith("{"):
            out.update(json.loads(text))
        else:
            for line in text.splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                try:
                    out[key.strip()] = json.loads(value.strip())
                except json.JSONDecodeError:
                    out[key.strip()] = value.strip()
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def _train_config(args) -> TrainConfig:
    cfg = load_config(args.config, loss=getattr(args, "loss", None),
                      seed=args.seed, iterations=getattr(args, "iterations", None),
                      learning_rate=getattr(args, "learning_rate", None))
    fields = {k: cfg[k] for k in ("loss", "batch_size", "iterations",
                                  "eval_interval", "seed", "learning_rate",
                                  "split") if k in cfg}
    if "split" in fields:
        fields["split"] = tuple(fields["split"])
    return TrainConfig(**fields)


def _net_config(cfg: dict) -> UpsamplerConfig:
    fields = {k: cfg[k] for k in ("residual_blocks", "base_filters") if k in cfg}
    return UpsamplerConfig(**fields)


def _load_frames(data_dir, geometry=None):
    paths = sorted(Path(data_dir).glob("*.ldi"))
    if not paths:
        raise LidarSRError(f"no .ldi files under {data_dir}")
    return [read_ldi(p, geometry=geometry) for p in paths]


def cmd_simulate(args):
    geometry = load_geometry(args.geometry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = range(args.seed, args.seed + args.count)
    for frame, seed in zip(synthesize_dataset(geometry, seeds,
                                              dropout=args.dropout), seeds):
        write_ldi(frame, out / f"scene_{seed:05d}.ldi")
    print(json.dumps({"frames": args.count, "out": str(out)}))


def cmd_project(args):
    geometry = load_geometry(args.geometry)
    image = ingest_bin(args.input, geometry)
    write_ldi(image, args.out)
    print(json.dumps({"valid_cells": image.valid_count(), "out": args.out}))


def cmd_decimate(args):
    image = read_ldi(args.input)
    write_ldi(decimate(image, args.parity), args.out)
    print(json.dumps({"rows": image.shape[0] // 2, "out": args.out}))


def cmd_train_upsampler(args):
    config = _train_config(args)
    frames = _load_frames(args.data)
    train, val, _ = split_dataset(frames, config.split)
    extractor = load_extractor(args.extractor) if args.extractor else None
    init = load_weights(args.init_weights) if args.init_weights else None
    net_config = _net_config(load_config(args.config))
    weights, log = train_upsampler(config, train, val or None,
                                   net_config=net_config, extractor=extractor,
                                   init_weights=init)
    save_weights(weights, args.out)
    log_path = Path(args.out).with_suffix(".log.json")
    log_path.write_text(json.dumps(log, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"out": args.out, "final": log[-1] if log else None}))


def cmd_train_extractor(args):
    cfg = load_config(args.config)
    frames = _load_frames(args.data)
    ex_config = ExtractorConfig(
        block_filters=tuple(cfg.get("block_filters", (32, 64, 96, 96, 64))))
    weights, log = train_extractor(
        frames, config=ex_config, iterations=int(cfg.get("iterations", 400)),
        batch_size=int(cfg.get("batch_size", 2)),
        learning_rate=float(cfg.get("learning_rate", 1e-3)), seed=args.seed)
    save_extractor(weights, args.out)
    print(json.dumps({"out": args.out, "final": log[-1] if log else None}))


def cmd_upsample(args):
    weights = load_weights(args.weights)
    low = read_ldi(args.input)
    with ad.no_grad():
        out = forward_tensor(weights, Tensor(to_network_raster(low)[None, None]),
                             training=False)
    geometry = SensorGeometry(
        elevations=doubled_elevations(low.geometry.elevations),
        azimuths=low.geometry.azimuths, max_range=low.geometry.max_range)
    image = prediction_to_image(out.data[0, 0], geometry)
    write_ldi(image, args.out)
    print(json.dumps({"rows": image.shape[0], "out": args.out}))


def cmd_evaluate(args):
    frames = _load_frames(args.data)
    extractor = load_extractor(args.extractor) if args.extractor else None
    candidate = load_weights(args.weights) if args.weights else args.method
    report = evaluate(frames, candidate, extractor=extractor)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_survey_prepare(args):
    frames = _load_frames(args.data)
    weights_by_method = {}
    methods = []
    for spec in args.methods.split(","):
        name, _, path = spec.partition("=")
        name = name.strip()
        methods.append(name)
        if path:
            weights_by_method[name] = load_weights(path.strip())
    manifest = survey_prepare(frames, methods, args.seed, args.out,
                              subjects=args.subjects,
                              weights_by_method=weights_by_method)
    print(json.dumps({"instances": len(manifest["instances"]),
                      "out": args.out}))


def cmd_survey_aggregate(args):
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    texts = [Path(p).read_text(encoding="utf-8") for p in args.ratings]
    report = survey_aggregate(texts, manifest)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lidarsr",
        description="LiDAR scan vertical super-resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, geometry=False):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="JSON or key=value file")
        if geometry:
            p.add_argument("--geometry", default=None, help="geometry JSON file")

    p = sub.add_parser("simulate", help="generate synthetic labeled frames")
    common(p, geometry=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("project", help="project a raw .bin cloud to an LDI image")
    common(p, geometry=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("decimate", help="drop every other layer of an LDI image")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--parity", choices=("even", "odd"), default="even")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_decimate)

    p = sub.add_parser("train-upsampler", help="train the up-sampling network")
    common(p)
    p.add_argument("--data", required=True, help="directory of high-res .ldi files")
    p.add_argument("--loss", choices=("l1", "l2", "feat0", "feat1", "feat2",
                                      "feat3", "sc"), default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None,
                   dest="learning_rate")
    p.add_argument("--extractor", default=None, help="extractor .lwt checkpoint")
    p.add_argument("--init-weights", default=None, dest="init_weights")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_upsampler)

    p = sub.add_parser("train-extractor", help="pre-train the segmentation net")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_extractor)

    p = sub.add_parser("upsample", help="apply trained weights to an LDI image")
    common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_upsample)

    p = sub.add_parser("evaluate", help="masked MAE/MSE (and mIoU) on a test set")
    common(p)
    p.add_argument("--data", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--method", choices=METHODS + ("gt",))
    group.add_argument("--weights")
    p.add_argument("--extractor", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("survey-prepare", help="render and blind MOS stimuli")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--methods", required=True,
                   help="comma list, e.g. gt,bilinear,nearest,l1=w.lwt")
    p.add_argument("--subjects", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_survey_prepare)

    p = sub.add_parser("survey-aggregate", help="de-blind ratings into MOS")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratings", nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_survey_aggregate)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (LidarSRError, OSError, ValueError, KeyError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end CLI exercises over temp directories."""

import json
import struct

import numpy as np
import pytest

from lidarsr.cli import load_config, load_geometry, main
from lidarsr.geometry import read_ldi

GEOM = {"layers": 8, "elevation_span": [-0.4, 0.03], "azimuth_count": 32,
        "max_range": 100.0}


@pytest.fixture()
def geometry_file(tmp_path):
    path = tmp_path / "geometry.json"
    path.write_text(json.dumps(GEOM))
    return path


def run(args):
    return main([str(a) for a in args])


def test_load_geometry_span_and_explicit(tmp_path):
    g = load_geometry(None)
    assert g.shape == (32, 256)
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"elevations": [-0.2, -0.1, 0.0, 0.1],
                                "azimuth_count": 8, "max_range": 50}))
    g2 = load_geometry(path)
    assert g2.shape == (4, 8) and g2.max_range == 50.0


def test_load_config_formats(tmp_path):
    j = tmp_path / "c.json"
    j.write_text('{"loss": "l2", "iterations": 5}')
    assert load_config(j)["loss"] == "l2"
    kv = tmp_path / "c.cfg"
    kv.write_text("# comment\nloss = l1\niterations = 7\nlearning_rate = 0.01\n")
    cfg = load_config(kv)
    assert cfg == {"loss": "l1", "iterations": 7, "learning_rate": 0.01}
    assert load_config(kv, iterations=9)["iterations"] == 9


def test_simulate_writes_frames(tmp_path, geometry_file, capsys):
    out = tmp_path / "frames"
    code = run(["simulate", "--geometry", geometry_file, "--count", 3,
                "--seed", 5, "--out", out])
    assert code == 0
    files = sorted(out.glob("*.ldi"))
    assert len(files) == 3
    img = read_ldi(files[0])
    assert img.shape == (8, 32)
    assert img.labels is not None


def test_project_and_decimate(tmp_path, geometry_file):
    scan = tmp_path / "scan.bin"
    with open(scan, "wb") as f:
        f.write(struct.pack("<ffff", 10.0, 0.0, -1.0, 0.3))
        f.write(struct.pack("<ffff", 5.0, 2.0, -0.5, 0.9))
    ldi = tmp_path / "scan.ldi"
    assert run(["project", "--geometry", geometry_file, "--input", scan,
                "--out", ldi]) == 0
    img = read_ldi(ldi)
    assert img.valid_count() == 2
    low = tmp_path / "low.ldi"
    assert run(["decimate", "--input", ldi, "--out", low]) == 0
    assert read_ldi(low).shape == (4, 32)


def test_error_is_machine_readable(tmp_path, capsys):
    code = run(["decimate", "--input", tmp_path / "missing.ldi",
                "--out", tmp_path / "x.ldi"])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert "error" in payload and "message" in payload


def test_full_training_pipeline(tmp_path, capsys):
    """simulate -> train-upsampler -> upsample -> evaluate round trip."""
    geometry_file = tmp_path / "g16.json"
    geometry_file.write_text(json.dumps(dict(GEOM, layers=16)))
    data = tmp_path / "data"
    run(["simulate", "--geometry", geometry_file, "--count", 6, "--out", data])
    cfg = tmp_path / "train.cfg"
    cfg.write_text("loss = l1\nbatch_size = 2\niterations = 8\n"
                   "eval_interval = 4\nlearning_rate = 0.001\n"
                   "residual_blocks = 1\nbase_filters = 8\n")
    weights = tmp_path / "model.lwt"
    assert run(["train-upsampler", "--data", data, "--config", cfg,
                "--out", weights]) == 0
    assert weights.exists()
    assert weights.with_suffix(".log.json").exists()

    low = tmp_path / "low.ldi"
    frames = sorted(data.glob("*.ldi"))
    run(["decimate", "--input", frames[0], "--out", low])
    up = tmp_path / "up.ldi"
    assert run(["upsample", "--weights", weights, "--input", low,
                "--out", up]) == 0
    assert read_ldi(up).shape == (16, 32)

    report_path = tmp_path / "report.json"
    assert run(["evaluate", "--data", data, "--method", "bilinear",
                "--out", report_path]) == 0
    report = json.loads(report_path.read_text())
    assert set(report) == {"mse", "mae", "miou", "per_class_iou", "frames"}
    assert report["frames"] == 6

    assert run(["evaluate", "--data", data, "--weights", weights]) == 0


def test_train_extractor_cli(tmp_path, geometry_file):
    data = tmp_path / "data"
    run(["simulate", "--geometry", geometry_file, "--count", 4, "--out", data])
    cfg = tmp_path / "ex.cfg"
    cfg.write_text('block_filters = [4, 4, 6, 6, 4]\niterations = 10\n')
    out = tmp_path / "extractor.lwt"
    assert run(["train-extractor", "--data", data, "--config", cfg,
                "--out", out]) == 0
    assert out.exists()
    manifest = json.loads(out.with_suffix(".lwt.json").read_text())
    assert manifest["block_filters"] == [4, 4, 6, 6, 4]


def test_survey_cli_round_trip(tmp_path, geometry_file):
    data = tmp_path / "data"
    run(["simulate", "--geometry", geometry_file, "--count", 2, "--out", data])
    survey = tmp_path / "survey"
    assert run(["survey-prepare", "--data", data, "--methods",
                "gt,bilinear,nearest", "--subjects", 2, "--seed", 3,
                "--out", survey]) == 0
    manifest = json.loads((survey / "manifest.json").read_text())
    assert len(manifest["instances"]) == 6

    ratings = tmp_path / "ratings.jsonl"
    lines = [json.dumps({"subject": "s0", "scene": inst["scene"],
                         "method": inst["alias"], "score": 4})
             for inst in manifest["instances"]]
    ratings.write_text("\n".join(lines))
    out = tmp_path / "mos.json"
    assert run(["survey-aggregate", "--manifest", survey / "manifest.json",
                "--ratings", ratings, "--out", out]) == 0
    report = json.loads(out.read_text())
    assert all(m["mos"] == 4.0 for m in report["methods"].values())

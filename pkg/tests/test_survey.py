"""Survey preparation (blinding, ordering, PLY) and MOS aggregation."""

import json

import numpy as np
import pytest

from lidarsr.datapipe import synthesize_dataset
from lidarsr.errors import DuplicateVote, UnknownAlias
from lidarsr.geometry import back_project, build_sensor
from lidarsr.survey import read_ply, survey_aggregate, survey_prepare, write_ply

METHODS = ["gt", "bilinear", "nearest"]


@pytest.fixture(scope="module")
def scenes():
    geom = build_sensor(np.linspace(-0.4, 0.03, 8), 32, 100.0)
    return synthesize_dataset(geom, range(3), dropout=0.05)


@pytest.fixture()
def prepared(scenes, tmp_path):
    manifest = survey_prepare(scenes, METHODS, seed=7, out_dir=tmp_path,
                              subjects=2)
    return manifest, tmp_path


def ratings_line(subject, scene, alias, score):
    return json.dumps({"subject": subject, "scene": scene, "method": alias,
                       "score": score, "timestamp": "t"})


def full_ratings(manifest, subject, score_of=lambda inst: 3):
    return "\n".join(ratings_line(subject, inst["scene"], inst["alias"],
                                  score_of(inst))
                     for inst in manifest["instances"])


# --- PLY -----------------------------------------------------------------------

def test_ply_round_trip(tmp_path, scenes):
    cloud = back_project(scenes[0])
    path = tmp_path / "cloud.ply"
    write_ply(cloud, path, with_classes=True)
    pts, classes = read_ply(path)
    assert pts.shape == cloud.points.shape
    np.testing.assert_allclose(pts, cloud.points, atol=1e-4)
    np.testing.assert_array_equal(classes, cloud.labels)


def test_ply_without_classes(tmp_path, scenes):
    cloud = back_project(scenes[0])
    path = tmp_path / "cloud.ply"
    write_ply(cloud, path)
    pts, classes = read_ply(path)
    assert classes is None
    assert len(pts) == len(cloud)


# --- survey_prepare ----------------------------------------------------------------

def test_prepare_instance_grid(prepared):
    manifest, out = prepared
    assert len(manifest["instances"]) == 3 * 3  # scenes x methods
    for inst in manifest["instances"]:
        assert (out / inst["file"]).exists()


def test_prepare_alias_bijection(prepared):
    manifest, _ = prepared
    aliases = manifest["methods"]
    assert sorted(aliases.values()) == sorted(METHODS)
    assert len(aliases) == len(METHODS)
    for token in aliases:
        assert token not in METHODS  # blinded tokens, not method names


def test_prepare_orders_are_permutations(prepared):
    manifest, _ = prepared
    ids = {inst["id"] for inst in manifest["instances"]}
    orders = manifest["orders"]
    assert len(orders) == 2
    a, b = orders.values()
    assert set(a) == ids and set(b) == ids
    assert a != b  # different subject seeds give different orders


def test_prepare_orders_deterministic(scenes, tmp_path):
    m1 = survey_prepare(scenes, METHODS, seed=9, out_dir=tmp_path / "a",
                        subjects=2)
    m2 = survey_prepare(scenes, METHODS, seed=9, out_dir=tmp_path / "b",
                        subjects=2)
    assert m1["orders"] == m2["orders"]
    assert m1["methods"] == m2["methods"]


def test_prepare_writes_anchors(prepared):
    manifest, out = prepared
    for key in ("five", "one"):
        assert (out / manifest["anchors"][key]).exists()
    gt_pts, _ = read_ply(out / manifest["anchors"]["five"])
    assert len(gt_pts) > 0


def test_prepare_needs_two_methods(scenes, tmp_path):
    with pytest.raises(ValueError):
        survey_prepare(scenes, ["gt"], seed=0, out_dir=tmp_path)


# --- survey_aggregate -----------------------------------------------------------------

def test_aggregate_uniform_scores(prepared):
    manifest, _ = prepared
    texts = [full_ratings(manifest, "subject_00"),
             full_ratings(manifest, "subject_01")]
    report = survey_aggregate(texts, manifest)
    assert set(report["methods"]) == set(METHODS)
    for m in METHODS:
        assert report["methods"][m]["mos"] == 3.0
        assert report["methods"][m]["votes"] == 6  # 3 scenes x 2 subjects
    assert report["incomplete"] == []


def test_aggregate_hand_means(prepared):
    manifest, _ = prepared
    alias_of = {m: a for a, m in manifest["methods"].items()}
    lines = []
    # gt gets 5s and one 4; bilinear gets 3s; nearest gets 1,2,2
    per_method_scores = {"gt": [5, 5, 4], "bilinear": [3, 3, 3],
                         "nearest": [1, 2, 2]}
    for m, scores in per_method_scores.items():
        for scene_i, s in enumerate(scores):
            lines.append(ratings_line("s0", f"scene_{scene_i:03d}",
                                      alias_of[m], s))
    report = survey_aggregate(["\n".join(lines)], manifest)
    assert report["methods"]["gt"]["mos"] == pytest.approx((5 + 5 + 4) / 3)
    assert report["methods"]["bilinear"]["mos"] == 3.0
    assert report["methods"]["nearest"]["mos"] == pytest.approx(5 / 3)
    assert report["methods"]["nearest"]["distribution"] == {
        "1": 1, "2": 2, "3": 0, "4": 0, "5": 0}


def test_aggregate_flags_missing_votes(prepared):
    manifest, _ = prepared
    text = full_ratings(manifest, "s0")
    lines = text.splitlines()[:-1]  # drop one vote
    report = survey_aggregate(["\n".join(lines)], manifest)
    assert len(report["incomplete"]) == 1
    missing = report["incomplete"][0]
    assert missing["subject"] == "s0"
    assert missing["method"] in METHODS


def test_aggregate_detects_duplicate(prepared):
    manifest, _ = prepared
    inst = manifest["instances"][0]
    line = ratings_line("s0", inst["scene"], inst["alias"], 4)
    with pytest.raises(DuplicateVote):
        survey_aggregate(["\n".join([line, line])], manifest)


def test_aggregate_unknown_alias(prepared):
    manifest, _ = prepared
    with pytest.raises(UnknownAlias):
        survey_aggregate([ratings_line("s0", "scene_000", "zzzzzz", 3)],
                         manifest)


def test_aggregate_skips_comment_lines(prepared):
    manifest, _ = prepared
    text = "# partial export\n" + full_ratings(manifest, "s0")
    report = survey_aggregate([text], manifest)
    assert sum(m["votes"] for m in report["methods"].values()) == 9

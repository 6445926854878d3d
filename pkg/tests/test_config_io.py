import json

import numpy as np
import pytest

from helpers import open_road, static_box
from pdmlab.config import CONFIG_ENV, RunConfig, load_config
from pdmlab.io import (
    SceneFormatError, atomic_write, dumps, load_scene, load_scenes, read_jsonl, save_scene, scene_from_dict,
    scene_to_dict, subscores_from_record, write_jsonl,
)


def test_config_round_trip():
    cfg = RunConfig(seed=7, topk=4)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_dotted_override():
    cfg = RunConfig().override({"seed": 3, "anchor.lambda_xy": 0.0, "paths.out": "x"})
    assert cfg.seed == 3 and cfg.anchor.lambda_xy == 0.0 and cfg.paths["out"] == "x"


@pytest.mark.parametrize("bad", [{"bogus": 1}, {"evaluator": {"nope": 1}}, {"score_weights": "v9"},
                                 {"pareto_min": 5, "pareto_max": 2}])
def test_config_rejects_bad_values(bad):
    with pytest.raises(ValueError):
        RunConfig.from_dict(bad)


@pytest.mark.parametrize("key", ["nope", "anchor.nope", "nosection.x"])
def test_override_rejects_unknown(key):
    with pytest.raises(ValueError):
        RunConfig().override({key: 1})


def test_config_from_env(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 11}))
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config().seed == 11
    monkeypatch.delenv(CONFIG_ENV)
    assert load_config() == RunConfig()
    path.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_config(str(path))


def test_scene_round_trip(tmp_path):
    scene = open_road([static_box(20.0, 3.0)], scene_id="rt")
    back = scene_from_dict(json.loads(dumps(scene_to_dict(scene))))
    assert scene_to_dict(back) == scene_to_dict(scene)
    save_scene(scene, tmp_path / "rt.json")
    assert [s.id for s in load_scenes(tmp_path)] == ["rt"]
    np.testing.assert_allclose(load_scene(tmp_path / "rt.json").human_trajectory.poses,
                               scene.human_trajectory.poses)


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.pop("centerline"), "centerline"),
    (lambda d: d.update(dt=-1), "dt"),
    (lambda d: d["ego"].pop("speed"), "ego.speed"),
    (lambda d: d.update(drivable=[[[0, 0], [1, 1]]]), "drivable[0]"),
])
def test_scene_errors_name_the_field(mutate, field):
    data = json.loads(dumps(scene_to_dict(open_road(scene_id="broken"))))
    mutate(data)
    with pytest.raises(SceneFormatError) as info:
        scene_from_dict(data)
    assert info.value.field == field and info.value.scene_id == "broken"
    assert "'broken'" in str(info.value)


def test_jsonl_and_atomic_write(tmp_path):
    rows = [{"b": 1, "a": [1.5, 2]}, {"a": None}]
    write_jsonl(tmp_path / "sub" / "x.jsonl", rows)
    assert list(read_jsonl(tmp_path / "sub" / "x.jsonl")) == rows
    atomic_write(tmp_path / "t.txt", "one")
    atomic_write(tmp_path / "t.txt", "two")
    assert (tmp_path / "t.txt").read_text() == "two"
    assert [p.name for p in tmp_path.iterdir() if p.is_file()] == ["t.txt"]


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": 2}) == dumps({"a": 2, "b": 1})


def test_subscores_from_record():
    from pdmlab.evaluator import SubScores
    rec = {**SubScores(ep=0.25).as_dict(), "other": "ignored"}
    assert subscores_from_record(rec).ep == 0.25
    with pytest.raises(ValueError, match="lacks"):
        subscores_from_record({"scene_id": "s", "ep": 0.25})

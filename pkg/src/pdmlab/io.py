"""JSON / JSONL readers and writers for scenes and scored results."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from .evaluator import SUBSCORE_NAMES, SubScores
from .geometry import GeometryError
from .scene import Centerline, ObstacleTrack, Pose2D, Scene, Trajectory


class SceneFormatError(ValueError):
    def __init__(self, scene_id: str, field: str, message: str):
        self.scene_id = scene_id
        self.field = field
        super().__init__(f"scene {scene_id!r}: field {field!r}: {message}")


def _points(value, scene_id: str, field: str, min_len: int = 1) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SceneFormatError(scene_id, field, f"not numeric ({exc})") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < min_len:
        raise SceneFormatError(scene_id, field, f"expected a list of >= {min_len} [x, y] points")
    return arr


def scene_from_dict(data: dict) -> Scene:
    """Build a :class:`Scene`, validating lengths and naming the offending field."""
    scene_id = str(data.get("id", "<missing id>"))
    for key in ("id", "dt", "horizon_steps", "ego", "centerline", "drivable", "obstacles", "human_trajectory"):
        if key not in data:
            raise SceneFormatError(scene_id, key, "missing")
    dt = float(data["dt"])
    T = int(data["horizon_steps"])
    if not dt > 0:
        raise SceneFormatError(scene_id, "dt", "must be positive")
    if T < 1:
        raise SceneFormatError(scene_id, "horizon_steps", "must be >= 1")

    ego = data["ego"]
    for key in ("x", "y", "heading", "speed"):
        if key not in ego:
            raise SceneFormatError(scene_id, f"ego.{key}", "missing")
    try:
        centerline = Centerline(_points(data["centerline"], scene_id, "centerline", 2))
    except GeometryError as exc:
        raise SceneFormatError(scene_id, "centerline", str(exc)) from None

    drivable = []
    for i, poly in enumerate(data["drivable"]):
        drivable.append(_points(poly, scene_id, f"drivable[{i}]", 3))
    if not drivable:
        raise SceneFormatError(scene_id, "drivable", "needs at least one polygon")

    obstacles = []
    for i, ob in enumerate(data["obstacles"]):
        fps = ob.get("footprints")
        if fps is None or len(fps) != T:
            raise SceneFormatError(scene_id, f"obstacles[{i}].footprints", f"expected {T} footprints")
        polys = [_points(fp, scene_id, f"obstacles[{i}].footprints[{t}]", 3) for t, fp in enumerate(fps)]
        try:
            obstacles.append(ObstacleTrack(tuple(polys), bool(ob.get("static", False))))
        except GeometryError as exc:
            raise SceneFormatError(scene_id, f"obstacles[{i}]", str(exc)) from None

    human = np.asarray(data["human_trajectory"], dtype=float)
    if human.shape != (T, 3):
        raise SceneFormatError(scene_id, "human_trajectory", f"expected {T} [x, y, heading] poses")
    try:
        human_traj = Trajectory(human, dt)
    except ValueError as exc:
        raise SceneFormatError(scene_id, "human_trajectory", str(exc)) from None

    zone = data.get("traffic_light_zone")
    if zone is not None:
        zone = _points(zone, scene_id, "traffic_light_zone", 3)
    human_sub = data.get("human_subscores")
    if human_sub is not None:
        try:
            human_sub = SubScores.from_mapping(human_sub)
        except (KeyError, ValueError, TypeError) as exc:
            raise SceneFormatError(scene_id, "human_subscores", str(exc)) from None

    try:
        return Scene.build(
            scene_id, Pose2D(ego["x"], ego["y"], ego["heading"]), float(ego["speed"]), centerline,
            drivable, obstacles, human_traj, dt=dt, horizon_steps=T, traffic_light_zone=zone,
            human_subscores=human_sub, meta=data.get("meta"),
        )
    except (ValueError, GeometryError) as exc:
        raise SceneFormatError(scene_id, "scene", str(exc)) from None


def scene_to_dict(scene: Scene) -> dict:
    out: dict[str, Any] = {
        "id": scene.id,
        "dt": scene.dt,
        "horizon_steps": scene.horizon_steps,
        "ego": {"x": scene.ego.pose.x, "y": scene.ego.pose.y, "heading": scene.ego.pose.heading,
                "speed": scene.ego.speed},
        "centerline": scene.centerline.vertices.tolist(),
        "drivable": [p.tolist() for p in scene.drivable],
        "obstacles": [{"static": ob.is_static, "footprints": [fp.tolist() for fp in ob.footprints]}
                      for ob in scene.obstacles],
        "human_trajectory": scene.human_trajectory.to_list(),
    }
    if scene.traffic_light_zone is not None:
        out["traffic_light_zone"] = scene.traffic_light_zone.tolist()
    if scene.human_subscores is not None:
        out["human_subscores"] = scene.human_subscores.as_dict()
    if scene.meta:
        out["meta"] = scene.meta
    return out


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))


def load_scenes(directory) -> list[Scene]:
    """All ``*.json`` scenes of a directory, sorted by file name."""
    return [load_scene(p) for p in sorted(Path(directory).glob("*.json"))]


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def save_scene(scene: Scene, path):
    write_json(path, scene_to_dict(scene))


def write_jsonl(path, records: Iterable[dict]):
    atomic_write(path, "".join(dumps(r) + "\n" for r in records))


def read_jsonl(path) -> Iterator[dict]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def subscores_from_record(record: dict) -> SubScores:
    missing = [n for n in SUBSCORE_NAMES if n not in record]
    if missing:
        raise ValueError(f"record {record.get('scene_id')!r}/{record.get('candidate_id')!r} lacks {missing}")
    return SubScores.from_mapping({n: record[n] for n in SUBSCORE_NAMES})

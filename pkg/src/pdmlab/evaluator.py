"""Rule-based trajectory evaluator: sub-scores, PDMS / EPDMS composition.

The geometric rules in :func:`compute_subscores` are a simplified, documented
stand-in for the official benchmark internals; every threshold lives in
:class:`EvaluatorConfig`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geometry import polygons_intersect, points_in_polygon, wrap_angle
from .scene import DEFAULT_VEHICLE_DIMS, Scene, Trajectory, footprints_along, points_in_drivable

SUBSCORE_NAMES = ("nc", "dac", "ddc", "tlc", "ep", "ttc", "lk", "hc", "ec", "comfort")
TERNARY = ("nc", "ddc")
CONTINUOUS = ("ep",)
BINARY = tuple(n for n in SUBSCORE_NAMES if n not in TERNARY + CONTINUOUS)
LEVELS = {n: (0.0, 0.5, 1.0) if n in TERNARY else (0.0, 1.0) for n in TERNARY + BINARY}


@dataclass(frozen=True)
class SubScores:
    """Per-trajectory metric vector.

    Values are validated to be finite and inside ``[0, 1]``; use
    :meth:`check_levels` to additionally require the discrete levels
    ({0, 1/2, 1} or {0, 1}) of a single evaluated trajectory. Aggregated
    benchmark rows (e.g. comfort = 0.999) are valid instances.
    """

    nc: float = 1.0
    dac: float = 1.0
    ddc: float = 1.0
    tlc: float = 1.0
    ep: float = 1.0
    ttc: float = 1.0
    lk: float = 1.0
    hc: float = 1.0
    ec: float = 1.0
    comfort: float = 1.0

    def __post_init__(self):
        for name in SUBSCORE_NAMES:
            v = float(getattr(self, name))
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"sub-score {name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)

    def check_levels(self) -> "SubScores":
        for name, levels in LEVELS.items():
            if getattr(self, name) not in levels:
                raise ValueError(f"sub-score {name}={getattr(self, name)} not in {levels}")
        return self

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def as_vector(self, components: Sequence[str] = SUBSCORE_NAMES) -> np.ndarray:
        return np.array([getattr(self, c) for c in components], dtype=float)

    @classmethod
    def from_mapping(cls, data: Mapping[str, float]) -> "SubScores":
        return cls(**{n: data[n] for n in SUBSCORE_NAMES if n in data})

    def replace(self, **changes) -> "SubScores":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScoreWeights:
    """Composition weights.

    ``multipliers`` gate the product term (a metric is included iff its weight
    is positive); ``weighted`` holds the weights of the normalised mean.
    """

    multipliers: Mapping[str, float] = field(default_factory=lambda: {"nc": 1.0, "dac": 1.0})
    weighted: Mapping[str, float] = field(default_factory=lambda: {"ep": 5.0, "ttc": 5.0, "comfort": 2.0})

    def __post_init__(self):
        for table in (self.multipliers, self.weighted):
            for name, w in table.items():
                if name not in SUBSCORE_NAMES:
                    raise ValueError(f"unknown metric {name!r}")
                if w < 0:
                    raise ValueError(f"negative weight for {name}")
        if not any(w > 0 for w in self.weighted.values()):
            raise ValueError("at least one weighted metric needs a positive weight")

    def to_dict(self) -> dict:
        return {"multipliers": dict(self.multipliers), "weighted": dict(self.weighted)}


PDMS_V1 = ScoreWeights()
# NC/DAC/DDC/TTC/EP/Comfort = 1/1/0/5/5/2
DEPLOYMENT = ScoreWeights(
    multipliers={"nc": 1.0, "dac": 1.0, "ddc": 0.0},
    weighted={"ttc": 5.0, "ep": 5.0, "comfort": 2.0},
)
EPDMS_V2 = ScoreWeights(
    multipliers={"nc": 1.0, "dac": 1.0, "ddc": 1.0, "tlc": 1.0},
    weighted={"ttc": 5.0, "ep": 5.0, "lk": 2.0, "hc": 2.0, "ec": 2.0},
)
NAMED_WEIGHTS = {"pdms": PDMS_V1, "deployment": DEPLOYMENT, "epdms": EPDMS_V2}


def compose(s: SubScores, w: ScoreWeights) -> float:
    """Gated product times weighted mean."""
    gate = 1.0
    for name, weight in w.multipliers.items():
        if weight > 0:
            gate *= getattr(s, name)
    total = sum(w.weighted.values())
    mean = sum(weight * getattr(s, name) for name, weight in w.weighted.items()) / total
    return gate * mean


def compose_pdms(s: SubScores, w: ScoreWeights = PDMS_V1) -> float:
    """PDMS = NC * DAC * (5 EP + 5 TTC + 2 C) / 12 under the default weights."""
    return compose(s, w)


def filter_subscore(agent_value: float, human_value: float) -> float:
    """Neutralise a penalty the human reference also incurs."""
    return 1.0 if human_value == 0 else float(agent_value)


def filtered(agent: SubScores, human: SubScores, names: Iterable[str] = SUBSCORE_NAMES) -> SubScores:
    return agent.replace(**{n: filter_subscore(getattr(agent, n), getattr(human, n)) for n in names})


def compose_epdms(agent: SubScores, human: Optional[SubScores] = None, w: ScoreWeights = EPDMS_V2) -> float:
    """EPDMS with false-positive filtering against the human sub-scores."""
    if human is None:
        return compose(agent, w)
    names = set(w.multipliers) | set(w.weighted)
    return compose(filtered(agent, human, names), w)


def two_stage_aggregate(stage1_score: float, followups: Sequence[tuple[float, float]],
                        bandwidth: float = 2.0) -> float:
    """Stage-1 score times the Gaussian-kernel weighted mean of follow-up scores.

    ``followups`` holds ``(start_state_distance, score)`` pairs.
    """
    if len(followups) == 0:
        raise ValueError("two_stage_aggregate needs at least one follow-up scene")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    d = np.array([f[0] for f in followups], dtype=float)
    scores = np.array([f[1] for f in followups], dtype=float)
    logits = -(d ** 2) / (2.0 * bandwidth ** 2)
    weights = np.exp(logits - logits.max())
    weights /= weights.sum()
    return float(stage1_score * np.dot(weights, scores))


def critic_loss(predicted: SubScores, truth: SubScores) -> dict[str, float]:
    """Squared error per component; ``total`` is their mean."""
    losses = {n: (getattr(predicted, n) - getattr(truth, n)) ** 2 for n in SUBSCORE_NAMES}
    losses["total"] = sum(losses.values()) / len(SUBSCORE_NAMES)
    return losses


def extended_comfort(prev_selected: Trajectory, current_selected: Trajectory,
                     pos_threshold: float = 1.0, head_threshold: float = 0.2,
                     shift_steps: int = 0) -> float:
    """1.0 iff consecutive selections agree within RMS thresholds (inclusive).

    ``prev_selected`` must already be expressed in the current ego frame;
    ``shift_steps`` drops that many leading poses of the previous selection
    to align the overlapping horizon.
    """
    if len(prev_selected) != len(current_selected) or prev_selected.dt != current_selected.dt:
        raise ValueError("extended_comfort needs trajectories with equal T and dt")
    T = len(current_selected)
    if not 0 <= shift_steps < T:
        raise ValueError("shift_steps outside the horizon")
    prev = prev_selected.poses[shift_steps:]
    cur = current_selected.poses[: T - shift_steps]
    pos_rms = math.sqrt(float(np.mean(np.sum((prev[:, :2] - cur[:, :2]) ** 2, axis=1))))
    head_rms = math.sqrt(float(np.mean(wrap_angle(prev[:, 2] - cur[:, 2]) ** 2)))
    return 1.0 if (pos_rms <= pos_threshold and head_rms <= head_threshold) else 0.0


@dataclass(frozen=True)
class EvaluatorConfig:
    vehicle_dims: tuple = DEFAULT_VEHICLE_DIMS
    ttc_horizon: float = 1.0
    max_accel: float = 2.4
    max_jerk: float = 4.0
    max_yaw_rate: float = 0.5
    lane_half_width: float = 1.75
    ddc_reverse_tolerance: float = 2.0
    ep_min_progress: float = 1e-3
    station_tolerance: float = 1e-6
    static_contact_nc: float = 0.5
    two_stage_bandwidth: float = 2.0
    ec_pos_threshold: float = 1.0
    ec_head_threshold: float = 0.2

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvaluatorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown evaluator config keys: {sorted(unknown)}")
        data = dict(data)
        if "vehicle_dims" in data:
            data["vehicle_dims"] = tuple(data["vehicle_dims"])
        return cls(**data)


class _SceneCache:
    """Per-scene data reused across many trajectories."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.boxes = []
        for ob in scene.obstacles:
            self.boxes.append(np.array([[fp[:, 0].min(), fp[:, 1].min(), fp[:, 0].max(), fp[:, 1].max()]
                                        for fp in ob.footprints]))
        hs, _ = scene.centerline.project(scene.human_trajectory.xy[-1])
        self.human_gain = float(hs - scene.ego.station)


_CACHES: dict[int, _SceneCache] = {}


def _scene_cache(scene: Scene) -> _SceneCache:
    cache = _CACHES.get(id(scene))
    if cache is None or cache.scene is not scene:
        if len(_CACHES) > 64:
            _CACHES.clear()
        cache = _SceneCache(scene)
        _CACHES[id(scene)] = cache
    return cache


def _contact(scene: Scene, cache: _SceneCache, poly: np.ndarray, step: int) -> tuple[bool, bool]:
    """(any contact, any contact with a non-static obstacle) at a step."""
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    hit = moving = False
    for ob, boxes in zip(scene.obstacles, cache.boxes):
        bx = boxes[step]
        if hi[0] < bx[0] or bx[2] < lo[0] or hi[1] < bx[1] or bx[3] < lo[1]:
            continue
        if polygons_intersect(poly, ob.footprints[step]):
            hit = True
            if not ob.is_static:
                moving = True
                break
    return hit, moving


def check_length(scene: Scene, trajectory: Trajectory):
    if len(trajectory) != scene.horizon_steps or trajectory.dt != scene.dt:
        raise ValueError(
            f"scene {scene.id}: trajectory has T={len(trajectory)}, dt={trajectory.dt}; "
            f"expected T={scene.horizon_steps}, dt={scene.dt}")


def kinematics(scene: Scene, trajectory: Trajectory) -> dict[str, np.ndarray]:
    """Finite-difference speed, acceleration, jerk and yaw rate.

    The current ego pose and speed anchor the first difference.
    """
    dt = trajectory.dt
    ego = scene.ego.pose
    xy = np.vstack([[ego.x, ego.y], trajectory.xy])
    heading = np.concatenate([[ego.heading], trajectory.heading])
    speed = np.concatenate([[scene.ego.speed], np.hypot(*np.diff(xy, axis=0).T) / dt])
    accel = np.diff(speed) / dt
    jerk = np.diff(accel) / dt
    yaw_rate = wrap_angle(np.diff(heading)) / dt
    return {"speed": speed, "accel": accel, "jerk": jerk, "yaw_rate": yaw_rate}


def compute_subscores(scene: Scene, trajectory: Trajectory,
                      config: EvaluatorConfig = EvaluatorConfig(),
                      stations: Optional[tuple[np.ndarray, np.ndarray]] = None) -> SubScores:
    """Evaluate one trajectory against a scene.

    ``stations`` may carry a precomputed ``(station, lateral)`` projection of
    the trajectory positions.
    """
    check_length(scene, trajectory)
    cache = _scene_cache(scene)
    T = len(trajectory)
    fps = footprints_along(trajectory, config.vehicle_dims)

    # NC: any overlap at the matching step; static-only contact is a half penalty
    hit_any = hit_moving = False
    for t in range(T):
        hit, moving = _contact(scene, cache, fps[t], t)
        hit_any |= hit
        hit_moving |= moving
        if hit_moving:
            break
    nc = 0.0 if hit_moving else (config.static_contact_nc if hit_any else 1.0)

    dac = 1.0 if bool(np.all(points_in_drivable(scene, fps.reshape(-1, 2)))) else 0.0

    if stations is None:
        station, lateral = scene.centerline.project_many(trajectory.xy)
    else:
        station, lateral = stations
    steps = np.diff(station)
    reverse = float(-steps[steps < -config.station_tolerance].sum())
    if reverse == 0.0:
        ddc = 1.0
    elif reverse < config.ddc_reverse_tolerance:
        ddc = 0.5
    else:
        ddc = 0.0

    tlc = 1.0
    if scene.traffic_light_zone is not None:
        if np.any(points_in_polygon(trajectory.xy, scene.traffic_light_zone)):
            tlc = 0.0

    human_gain = cache.human_gain
    gain = float(station[-1] - scene.ego.station)
    ep = min(max(gain / max(human_gain, config.ep_min_progress), 0.0), 1.0)

    ttc = 0.0 if hit_any else _ttc(scene, cache, trajectory, config)

    kin = kinematics(scene, trajectory)
    comfortable = (np.all(np.abs(kin["accel"]) <= config.max_accel + 1e-9)
                   and np.all(np.abs(kin["jerk"]) <= config.max_jerk + 1e-9)
                   and np.all(np.abs(kin["yaw_rate"]) <= config.max_yaw_rate + 1e-9))
    comfort = 1.0 if comfortable else 0.0

    lk = 1.0 if bool(np.all(np.abs(lateral) <= config.lane_half_width + 1e-9)) else 0.0

    return SubScores(nc=nc, dac=dac, ddc=ddc, tlc=tlc, ep=ep, ttc=ttc, lk=lk,
                     hc=comfort, ec=1.0, comfort=comfort)


def _ttc(scene: Scene, cache: _SceneCache, trajectory: Trajectory, config: EvaluatorConfig) -> float:
    """Constant-velocity forward projection from every step stays collision-free."""
    if not scene.obstacles:
        return 1.0
    dt = trajectory.dt
    T = len(trajectory)
    ego = scene.ego.pose
    xy = np.vstack([[ego.x, ego.y], trajectory.xy])
    vel = np.diff(xy, axis=0) / dt
    n_ahead = int(round(config.ttc_horizon / dt))
    length, width = config.vehicle_dims
    for t in range(T):
        for k in range(1, n_ahead + 1):
            delta = k * dt
            cx, cy = trajectory.xy[t] + vel[t] * delta
            h = trajectory.heading[t]
            c, s = math.cos(h), math.sin(h)
            hl, hw = 0.5 * length, 0.5 * width
            poly = np.array([[cx - c * hl + s * hw, cy - s * hl - c * hw],
                             [cx + c * hl + s * hw, cy + s * hl - c * hw],
                             [cx + c * hl - s * hw, cy + s * hl + c * hw],
                             [cx - c * hl - s * hw, cy - s * hl + c * hw]])
            hit, _ = _contact(scene, cache, poly, min(t + k, T - 1))
            if hit:
                return 0.0
    return 1.0


def human_subscores(scene: Scene, config: EvaluatorConfig = EvaluatorConfig()) -> SubScores:
    if scene.human_subscores is not None:
        return scene.human_subscores
    return compute_subscores(scene, scene.human_trajectory, config)


@dataclass(frozen=True)
class Evaluation:
    subscores: SubScores
    pdms: float
    epdms: float


def evaluate(scene: Scene, trajectory: Trajectory, config: EvaluatorConfig = EvaluatorConfig(),
             human: Optional[SubScores] = None) -> Evaluation:
    s = compute_subscores(scene, trajectory, config)
    if human is None:
        human = human_subscores(scene, config)
    return Evaluation(s, compose_pdms(s), compose_epdms(s, human))


def evaluate_batch(scene: Scene, trajectories: Sequence[Trajectory],
                   config: EvaluatorConfig = EvaluatorConfig()) -> list[Evaluation]:
    """Evaluate many trajectories; output order equals input order."""
    human = human_subscores(scene, config)
    return [evaluate(scene, t, config, human) for t in trajectories]

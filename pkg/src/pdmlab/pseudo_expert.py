"""Evaluator-filtered pseudo-expert generation.

Pipeline per scene: structured candidate families -> geometric pre-check ->
evaluator scoring -> coverage-aware selection -> boundary interpolation ->
training-time farthest-point sampling.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .evaluator import EvaluatorConfig, SubScores, compose_epdms, compose_pdms, compute_subscores, human_subscores
from .geometry import polygon_distance, polygons_intersect
from .scene import Scene, Trajectory, footprints_along, pairwise_l1, points_in_drivable


class Family(str, enum.Enum):
    LATERAL_TRANSITION = "LateralTransition"
    OFF_ROAD = "OffRoad"
    ACCEL_PROFILE = "AccelProfile"
    STOP_GO = "StopGo"
    APPROACH_BRAKE = "ApproachBrake"
    OVERSHOOT = "Overshoot"


class Feasibility(str, enum.Enum):
    FEASIBLE = "Feasible"
    NEAR_FEASIBLE = "NearFeasible"
    INFEASIBLE = "Infeasible"


class FamilyGenerationError(ValueError):
    def __init__(self, family: Family, message: str):
        self.family = family
        super().__init__(f"{family.value}: {message}")


@dataclass(frozen=True)
class FamilyConfig:
    speeds: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0)
    regular_laterals: tuple = (-3.5, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.5)
    offroad_laterals: tuple = (-7.0, -5.5, 5.5, 7.0)
    portions: tuple = (0.35, 0.6, 1.0)
    accels: tuple = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
    counts: Mapping[str, int] = field(default_factory=lambda: {
        Family.LATERAL_TRANSITION.value: 200,
        Family.OFF_ROAD.value: 12,
        Family.ACCEL_PROFILE.value: 18,
        Family.STOP_GO.value: 9,
        Family.APPROACH_BRAKE.value: 10,
        Family.OVERSHOOT.value: 12,
    })
    overshoot_ratio: float = 0.3
    max_scored: int = 180
    pool_keep: int = 50
    score_bins: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.01)
    progress_bins: tuple = (0.0, 0.2, 0.5, 0.8, 1.01)
    boundary_drop: float = 0.25
    max_boundaries: int = 3
    samples_per_boundary: int = 1
    near_margin: float = 0.5
    max_offroad_steps_near: int = 2
    train_threshold: float = 0.8
    train_top_k: int = 8
    fps_heading_weight: float = 1.0
    human_coverage_radius: float = 1.0

    def __post_init__(self):
        for name in ("speeds", "regular_laterals", "offroad_laterals", "portions", "accels",
                     "score_bins", "progress_bins"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        counts = {Family(k).value: int(v) for k, v in dict(self.counts).items()}
        if set(counts) != {f.value for f in Family}:
            raise ValueError("counts must name every family")
        if any(v <= 0 for v in counts.values()):
            raise ValueError("family counts must be positive")
        object.__setattr__(self, "counts", counts)
        for name in ("score_bins", "progress_bins"):
            edges = getattr(self, name)
            if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if not all(0 < p <= 1 for p in self.portions):
            raise ValueError("portions must lie in (0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping) -> "FamilyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown family config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: (dict(getattr(self, f.name)) if f.name == "counts" else getattr(self, f.name))
                for f in fields(self)}

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class Candidate:
    trajectory: Trajectory
    family: Family
    speed_profile: tuple
    lat_start: float
    lat_end: float
    portion: float
    params: Mapping = field(default_factory=dict)
    index: int = -1
    feasibility: Optional[Feasibility] = None

    def describe(self) -> dict:
        return {"family": self.family.value, "speed_profile": list(self.speed_profile),
                "lat_start": self.lat_start, "lat_end": self.lat_end, "portion": self.portion,
                **dict(self.params)}


def quintic(r):
    """The polynomial ``6r^5 - 15r^4 + 10r^3`` without clamping."""
    r = np.asarray(r, dtype=float)
    out = r * r * r * (r * (6.0 * r - 15.0) + 10.0)
    return float(out) if out.ndim == 0 else out


def smooth_step(r):
    """:func:`quintic` on ``[0, 1]``, constant outside (input clamped)."""
    # rounding can push the polynomial a few ulps past 1 just below r = 1
    out = np.clip(quintic(np.clip(np.asarray(r, dtype=float), 0.0, 1.0)), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def lateral_profile(T: int, lat_start: float, lat_end: float, portion: float,
                    overshoot: float = 0.0) -> np.ndarray:
    """Lateral offsets for steps ``1..T``.

    With ``overshoot > 0`` the transition first reaches
    ``lat_start + (1 + overshoot) * delta`` at ``portion * T`` and then settles
    onto ``lat_end`` over the remaining steps.
    """
    if not 0 < portion <= 1:
        raise ValueError("portion must lie in (0, 1]")
    t = np.arange(1, T + 1, dtype=float)
    span = portion * T
    delta = lat_end - lat_start
    if overshoot <= 0:
        return lat_start + delta * smooth_step(np.minimum(t / span, 1.0))
    if portion >= 1:
        raise ValueError("overshoot needs portion < 1 to leave room for settling")
    peak = lat_start + (1.0 + overshoot) * delta
    rise = lat_start + (peak - lat_start) * smooth_step(t / span)
    settle = peak + (lat_end - peak) * smooth_step((t - span) / (T - span))
    return np.where(t <= span, rise, settle)


def build_candidate(scene: Scene, speed_profile, lat_start: float, lat_end: float, portion: float,
                    overshoot: float = 0.0, xy_limit: float = 100.0) -> Trajectory:
    """Map a (progress, lateral) plan to Cartesian poses along the centerline."""
    speeds = np.asarray(speed_profile, dtype=float)
    T = scene.horizon_steps
    if speeds.shape != (T,):
        raise ValueError(f"speed profile needs {T} entries")
    stations = scene.ego.station + np.cumsum(speeds) * scene.dt
    lateral = lateral_profile(T, lat_start, lat_end, portion, overshoot)
    poses = scene.centerline.to_cartesian(stations, lateral)
    poses[:, :2] = np.clip(poses[:, :2], -xy_limit, xy_limit)
    return Trajectory(poses, scene.dt, xy_limit=xy_limit)


def constant_speed(v: float, T: int) -> tuple:
    return tuple([float(v)] * T)


def accel_speed(v0: float, accel: float, T: int, dt: float) -> tuple:
    return tuple(float(max(0.0, v0 + accel * k * dt)) for k in range(1, T + 1))


def stop_speed(v0: float, stop_step: int, T: int) -> tuple:
    """Linear deceleration reaching zero at ``stop_step``, then hold."""
    return tuple(float(v0 * max(0.0, 1.0 - k / stop_step)) for k in range(1, T + 1))


def brake_speed(v0: float, brake_step: int, decel: float, T: int, dt: float) -> tuple:
    """Hold ``v0`` for ``brake_step`` steps, then brake at ``decel`` (< 0)."""
    return tuple(float(v0 if k <= brake_step else max(0.0, v0 + decel * (k - brake_step) * dt))
                 for k in range(1, T + 1))


def _stratified(grid: list, key, count: int, rng: np.random.Generator, family: Family) -> list:
    """Round-robin over strata (sorted keys), each stratum shuffled by ``rng``."""
    if count > len(grid):
        raise FamilyGenerationError(family, f"grid has {len(grid)} entries, {count} requested")
    strata: dict = {}
    for i, item in enumerate(grid):
        strata.setdefault(key(item), []).append(i)
    queues = [list(np.asarray(strata[k])[rng.permutation(len(strata[k]))]) for k in sorted(strata)]
    picked: list[int] = []
    while len(picked) < count:
        for q in queues:
            if q and len(picked) < count:
                picked.append(int(q.pop(0)))
    return [grid[i] for i in sorted(picked)]


def _nearest(values: Sequence[float], target: float) -> float:
    return float(min(values, key=lambda v: (abs(v - target), v)))


def generate_families(scene: Scene, config: FamilyConfig = FamilyConfig(), seed: int = 0) -> list[Candidate]:
    """Enumerate every family grid and subsample each to its configured count."""
    T, dt = scene.horizon_steps, scene.dt
    lat0 = scene.ego.lateral
    v_ego = scene.ego.speed
    out: list[Candidate] = []

    def emit(family: Family, speeds: tuple, lat_end: float, portion: float, params: dict, overshoot=0.0):
        traj = build_candidate(scene, speeds, lat0, lat_end, portion, overshoot)
        out.append(Candidate(traj, family, speeds, lat0, float(lat_end), float(portion), params, len(out)))

    def pick(family: Family, grid: list, key) -> list:
        k = list(Family).index(family)
        rng = np.random.default_rng([seed, k])
        return _stratified(grid, key, config.counts[family.value], rng, family)

    fam = Family.LATERAL_TRANSITION
    grid = [(v, l, p) for v in config.speeds for l in config.regular_laterals for p in config.portions]
    for v, l, p in pick(fam, grid, key=lambda g: g[0]):
        emit(fam, constant_speed(v, T), l, p, {"speed": v})

    fam = Family.OFF_ROAD
    v_off = _nearest(config.speeds, v_ego)
    grid = [(l, p) for l in config.offroad_laterals for p in config.portions]
    for l, p in pick(fam, grid, key=lambda g: g[0]):
        emit(fam, constant_speed(v_off, T), l, p, {"speed": v_off})

    fam = Family.ACCEL_PROFILE
    grid = [(a, l, p) for a in config.accels for l in config.regular_laterals for p in config.portions]
    for a, l, p in pick(fam, grid, key=lambda g: g[0]):
        emit(fam, accel_speed(v_ego, a, T, dt), l, p, {"speed": v_ego, "accel": a})

    fam = Family.STOP_GO
    grid = [(k, l) for k in range(1, T // 2 + 1) for l in config.regular_laterals]
    for k, l in pick(fam, grid, key=lambda g: g[0]):
        emit(fam, stop_speed(v_ego, k, T), l, k / T, {"speed": v_ego, "stop_step": k})

    fam = Family.APPROACH_BRAKE
    decels = [a for a in config.accels if a < 0]
    grid = [(k, a) for k in range(1, T) for a in decels]
    for k, a in pick(fam, grid, key=lambda g: g[0]):
        emit(fam, brake_speed(v_ego, k, a, T, dt), lat0, 1.0,
             {"speed": v_ego, "brake_step": k, "accel": a})

    fam = Family.OVERSHOOT
    grid = [(v, l, p) for v in config.speeds for l in config.regular_laterals
            for p in config.portions if p < 1 and abs(l - lat0) > 1e-9]
    for v, l, p in pick(fam, grid, key=lambda g: g[0]):
        emit(fam, constant_speed(v, T), l, p, {"speed": v, "overshoot": config.overshoot_ratio},
             overshoot=config.overshoot_ratio)
    return out


def precheck(scene: Scene, candidate: Candidate, config: FamilyConfig = FamilyConfig(),
             vehicle_dims=(4.6, 1.9)) -> Feasibility:
    """Coarse feasibility label from drivable-area corners and obstacle occupancy."""
    fps = footprints_along(candidate.trajectory, vehicle_dims)
    T = len(fps)
    inside = points_in_drivable(scene, fps.reshape(-1, 2)).reshape(T, 4)
    off_steps = int(np.count_nonzero(~inside.all(axis=1)))
    near = False
    lo, hi = fps.min(axis=1), fps.max(axis=1)
    for t in range(T):
        for ob in scene.obstacles:
            other = ob.footprints[t]
            # bounding boxes farther apart than the margin cannot touch or be near
            gap = np.maximum(other.min(axis=0) - hi[t], lo[t] - other.max(axis=0))
            if gap.max() > config.near_margin:
                continue
            if polygons_intersect(fps[t], other):
                return Feasibility.INFEASIBLE
            if not near and polygon_distance(fps[t], other) <= config.near_margin:
                near = True
    if off_steps > config.max_offroad_steps_near:
        return Feasibility.INFEASIBLE
    if off_steps > 0 or near:
        return Feasibility.NEAR_FEASIBLE
    return Feasibility.FEASIBLE


def label_pool(scene: Scene, pool: Sequence[Candidate], config: FamilyConfig = FamilyConfig(),
               vehicle_dims=(4.6, 1.9)) -> list[Candidate]:
    return [replace(c, feasibility=precheck(scene, c, config, vehicle_dims)) for c in pool]


def select_for_scoring(pool: Sequence[Candidate], max_scored: int = 180, seed: int = 0) -> list[Candidate]:
    """Feasible first, then near-feasible, then a seeded sample of infeasible."""
    if any(c.feasibility is None for c in pool):
        raise ValueError("pre-check every candidate before selection")
    feasible = [c for c in pool if c.feasibility == Feasibility.FEASIBLE]
    near = [c for c in pool if c.feasibility == Feasibility.NEAR_FEASIBLE]
    infeasible = [c for c in pool if c.feasibility == Feasibility.INFEASIBLE]
    chosen = (feasible + near)[:max_scored]
    room = max_scored - len(chosen)
    if room > 0 and infeasible:
        rng = np.random.default_rng(seed)
        take = sorted(rng.choice(len(infeasible), size=min(room, len(infeasible)), replace=False))
        chosen += [infeasible[i] for i in take]
    return chosen


def bin_index(value: float, edges: Sequence[float]) -> int:
    i = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(i, 0), len(edges) - 2)


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: Candidate
    subscores: SubScores
    pdms: float
    epdms: float
    coverage_key: tuple
    score_bin: int
    interpolated: bool = False


def score_candidate(scene: Scene, candidate: Candidate, config: FamilyConfig = FamilyConfig(),
                    evaluator: EvaluatorConfig = EvaluatorConfig(), human: Optional[SubScores] = None,
                    interpolated: bool = False) -> ScoredCandidate:
    s = compute_subscores(scene, candidate.trajectory, evaluator)
    if human is None:
        human = human_subscores(scene, evaluator)
    pdms = compose_pdms(s)
    key = (s.dac, s.nc, s.ttc, s.comfort, bin_index(s.ep, config.progress_bins))
    return ScoredCandidate(candidate, s, pdms, compose_epdms(s, human), key,
                           bin_index(pdms, config.score_bins), interpolated)


COVERAGE_KEY_WEIGHT = 10


def coverage_cost(key_count, bin_count):
    """Selection cost given how many picks already share the key and the score bin."""
    return COVERAGE_KEY_WEIGHT * np.asarray(key_count) + np.asarray(bin_count)


def coverage_order(scored: Sequence[ScoredCandidate], keep: int = 50) -> list[int]:
    """Greedy pick order minimising :func:`coverage_cost`.

    Ties go to the higher PDMS, then the lower position in ``scored``.
    """
    n = len(scored)
    keys = {}
    key_id = np.array([keys.setdefault(s.coverage_key, len(keys)) for s in scored], dtype=int)
    bin_id = np.array([s.score_bin for s in scored], dtype=int)
    pdms = np.array([s.pdms for s in scored], dtype=float)
    idx = np.arange(n)
    cov = np.zeros(len(keys), dtype=int)
    bins = np.zeros(int(bin_id.max()) + 1 if n else 1, dtype=int)
    taken = np.zeros(n, dtype=bool)
    order: list[int] = []
    for _ in range(min(keep, n)):
        cost = coverage_cost(cov[key_id], bins[bin_id])
        cost = np.where(taken, np.iinfo(np.int64).max, cost)
        best = int(np.lexsort((idx, -pdms, cost))[0])
        order.append(best)
        taken[best] = True
        cov[key_id[best]] += 1
        bins[bin_id[best]] += 1
    return order


def coverage_select(scored: Sequence[ScoredCandidate], keep: int = 50) -> list[ScoredCandidate]:
    return [scored[i] for i in coverage_order(scored, keep)]


def _profile_key(c: Candidate) -> tuple:
    return (c.family.value, c.speed_profile)


def find_boundaries(scored: Sequence[ScoredCandidate], drop: float = 0.25,
                    max_boundaries: int = 3) -> list[tuple[float, ScoredCandidate, ScoredCandidate]]:
    """Adjacent lateral targets whose PDMS differs by more than ``drop``.

    Candidates are grouped by family and longitudinal (speed) profile and
    ordered by ``(lat_end, portion)``. Returns ``(drop, high, low)`` triples,
    largest drops first.
    """
    groups: dict = {}
    for pos, s in enumerate(scored):
        groups.setdefault(_profile_key(s.candidate), []).append((pos, s))
    found = []
    for g_order, key in enumerate(groups):
        members = sorted(groups[key], key=lambda e: (e[1].candidate.lat_end, e[1].candidate.portion, e[0]))
        for (pa, a), (pb, b) in zip(members[:-1], members[1:]):
            if abs(a.candidate.lat_end - b.candidate.lat_end) <= 1e-9:
                continue
            d = abs(a.pdms - b.pdms)
            if d > drop:
                hi, lo = (a, b) if a.pdms >= b.pdms else (b, a)
                found.append((d, g_order, pa, hi, lo))
    found.sort(key=lambda f: (-f[0], f[1], f[2]))
    return [(f[0], f[3], f[4]) for f in found[:max_boundaries]]


def boundary_interpolate(scene: Scene, scored: Sequence[ScoredCandidate], config: FamilyConfig = FamilyConfig(),
                         evaluator: EvaluatorConfig = EvaluatorConfig(), next_index: int = 0) -> list[ScoredCandidate]:
    """Score extra candidates between the two sides of each PDMS boundary."""
    extras = []
    human = human_subscores(scene, evaluator)
    n = config.samples_per_boundary
    for _, hi, lo in find_boundaries(scored, config.boundary_drop, config.max_boundaries):
        c = hi.candidate
        for j in range(1, n + 1):
            lat = c.lat_end + (lo.candidate.lat_end - c.lat_end) * j / (n + 1)
            overshoot = float(c.params.get("overshoot", 0.0))
            traj = build_candidate(scene, c.speed_profile, c.lat_start, lat, c.portion, overshoot)
            cand = replace(c, trajectory=traj, lat_end=float(lat), index=next_index + len(extras),
                           params={**dict(c.params), "interpolated_from": [c.index, lo.candidate.index]})
            extras.append(score_candidate(scene, cand, config, evaluator, human, interpolated=True))
    return extras


def mean_l1_matrix(first, second, heading_weight: float = 1.0) -> np.ndarray:
    """Mean per-pose L1 distance between trajectory collections."""
    T = len(first[0]) if len(first) else 1
    return pairwise_l1(first, second, heading_weight) / T


def farthest_point_order(dist: np.ndarray, m: int, start: int = 0) -> list[int]:
    """Greedy max-min selection from a square distance matrix.

    Ties go to the lower index.
    """
    n = dist.shape[0]
    if n == 0:
        return []
    order = [start]
    min_d = dist[start].astype(float).copy()
    min_d[start] = -np.inf
    while len(order) < min(m, n):
        nxt = int(np.argmax(min_d))
        order.append(nxt)
        min_d = np.minimum(min_d, dist[nxt])
        min_d[order] = -np.inf
    return order


@dataclass(frozen=True)
class TrainingSample:
    trajectories: tuple
    sources: tuple
    mask: np.ndarray

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(M, T, 3)`` padded pose array and the ``(M,)`` validity mask."""
        M = len(self.mask)
        T = len(self.trajectories[0])
        out = np.zeros((M, T, 3))
        for i, t in enumerate(self.trajectories):
            out[i] = t.poses
        return out, self.mask.copy()


def training_sample(pool: Sequence[ScoredCandidate], human: Trajectory, threshold: float = 0.8,
                    m: int = 8, heading_weight: float = 1.0, coverage_radius: float = 1.0) -> TrainingSample:
    """Score filter, PDMS sort, then farthest-point sampling seeded at the best candidate.

    The human trajectory is appended when it is farther than
    ``coverage_radius`` (mean per-pose L1) from every pick and a slot is
    free; with no qualifying candidate it is returned alone.
    """
    qualified = [(i, s) for i, s in enumerate(pool) if s.pdms >= threshold]
    qualified.sort(key=lambda e: (-e[1].pdms, e[0]))
    mask = np.zeros(m, dtype=int)
    if not qualified:
        mask[0] = 1
        return TrainingSample((human,), ("human",), mask)
    trajs = [s.candidate.trajectory for _, s in qualified]
    order = farthest_point_order(mean_l1_matrix(trajs, trajs, heading_weight), m)
    picked = [trajs[i] for i in order]
    sources = [qualified[i][1].candidate.index for i in order]
    if len(picked) < m:
        d_human = mean_l1_matrix([human], picked, heading_weight).min()
        if d_human > coverage_radius:
            picked.append(human)
            sources.append("human")
    mask[: len(picked)] = 1
    return TrainingSample(tuple(picked), tuple(sources), mask)


@dataclass
class PipelineResult:
    scene_id: str
    generated: list
    labelled: list
    to_score: list
    scored: list
    retained: list
    interpolated: list
    sample: TrainingSample
    timings: dict

    @property
    def final_pool(self) -> list:
        return self.retained + self.interpolated


def run_pipeline(scene: Scene, config: FamilyConfig = FamilyConfig(),
                 evaluator: EvaluatorConfig = EvaluatorConfig(), seed: int = 0) -> PipelineResult:
    """Run every stage for one scene."""
    timings = {}
    t0 = time.perf_counter()
    generated = generate_families(scene, config, seed)
    timings["generate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    labelled = label_pool(scene, generated, config, evaluator.vehicle_dims)
    to_score = select_for_scoring(labelled, config.max_scored, seed)
    timings["precheck"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    human = human_subscores(scene, evaluator)
    scored = [score_candidate(scene, c, config, evaluator, human) for c in to_score]
    timings["score"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    retained = coverage_select(scored, config.pool_keep)
    # wrong-direction candidates are dropped before interpolation
    retained = [s for s in retained if s.subscores.ddc >= 1.0]
    interpolated = boundary_interpolate(scene, scored, config, evaluator, next_index=len(generated))
    interpolated = [s for s in interpolated if s.subscores.ddc >= 1.0]
    sample = training_sample(retained + interpolated, scene.human_trajectory, config.train_threshold,
                             config.train_top_k, config.fps_heading_weight, config.human_coverage_radius)
    timings["select"] = time.perf_counter() - t0
    return PipelineResult(scene.id, generated, labelled, to_score, scored, retained, interpolated, sample, timings)


def scored_record(scene_id: str, s: ScoredCandidate, retained: bool = False) -> dict:
    c = s.candidate
    return {
        "scene_id": scene_id,
        "candidate_id": c.index,
        "family": c.family.value,
        "params": _jsonable(c.describe()),
        "feasibility": c.feasibility.value if c.feasibility else None,
        "trajectory": c.trajectory.to_list(),
        "dt": c.trajectory.dt,
        **s.subscores.as_dict(),
        "pdms": s.pdms,
        "epdms": s.epdms,
        "coverage_key": list(s.coverage_key),
        "score_bin": s.score_bin,
        "interpolated": s.interpolated,
        "retained": retained,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def pseudo_experts_record(scene_id: str, sample: TrainingSample) -> dict:
    arr, mask = sample.as_arrays()
    return {"scene_id": scene_id, "pseudo_experts": arr.tolist(), "pseudo_expert_mask": mask.tolist(),
            "sources": list(sample.sources)}

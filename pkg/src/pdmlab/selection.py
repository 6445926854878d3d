"""Scorers, proposal ranking, distillation targets, loss terms and anchor reranking."""

from __future__ import annotations

import abc
import math
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .evaluator import (
    DEPLOYMENT, LEVELS, SUBSCORE_NAMES, EvaluatorConfig, ScoreWeights, SubScores, compose, compute_subscores,
)
from .geometry import wrap_angle
from .scene import Scene, Trajectory, pairwise_l1, trajectory_l1


class InvalidInput(ValueError):
    pass


@dataclass(frozen=True)
class PoolEntry:
    """One proposal: its trajectory, identifiers and (optionally) known true sub-scores."""
    scene_id: str
    candidate_id: int
    trajectory: Trajectory
    truth: Optional[SubScores] = None


def as_entries(pool, scene: Optional[Scene] = None) -> list[PoolEntry]:
    """Accept PoolEntry objects or bare trajectories (indexed by position)."""
    sid = scene.id if scene is not None else ""
    return [p if isinstance(p, PoolEntry) else PoolEntry(sid, i, p) for i, p in enumerate(pool)]


def true_subscores(entry: PoolEntry, scene: Optional[Scene] = None,
                   config: EvaluatorConfig = EvaluatorConfig()) -> SubScores:
    if scene is not None:
        return compute_subscores(scene, entry.trajectory, config)
    if entry.truth is None:
        raise InvalidInput(f"candidate {entry.candidate_id}: no scene and no recorded sub-scores")
    return entry.truth


class Scorer(abc.ABC):
    """Maps a proposal to predicted sub-scores."""

    @abc.abstractmethod
    def predict(self, entry: PoolEntry, scene: Optional[Scene] = None) -> SubScores:
        ...

    def composed(self, entry: PoolEntry, scene: Optional[Scene] = None,
                 weights: ScoreWeights = DEPLOYMENT) -> float:
        return compose(self.predict(entry, scene), weights)


class OracleScorer(Scorer):
    """Returns the rule-based evaluator's sub-scores (or the recorded ones without a scene)."""

    def __init__(self, config: EvaluatorConfig = EvaluatorConfig()):
        self.config = config

    def predict(self, entry, scene=None):
        return true_subscores(entry, scene, self.config)


class NoisyScorer(Scorer):
    """Oracle sub-scores corrupted by seeded bounded noise.

    ``level="subscores"`` perturbs EP by ``U(-eps, eps)`` (clipped) and flips
    each discrete component with probability ``p_flip``. ``level="composed"``
    leaves sub-scores exact and perturbs the composed score by ``U(-eps, eps)``
    so that ``|s - R*| <= eps`` holds for the composed value.

    Randomness is drawn from a generator keyed by ``(seed, crc32(scene_id),
    candidate_id)``, so results do not depend on evaluation order.
    """

    def __init__(self, eps: float, seed: int = 0, p_flip: float = 0.0, level: str = "subscores",
                 base: Optional[Scorer] = None):
        if eps < 0 or not 0 <= p_flip <= 1:
            raise ValueError("eps must be >= 0 and p_flip in [0, 1]")
        if level not in ("subscores", "composed"):
            raise ValueError(f"unknown noise level {level!r}")
        self.eps, self.seed, self.p_flip, self.level = float(eps), int(seed), float(p_flip), level
        self.base = base or OracleScorer()

    def _rng(self, entry: PoolEntry) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(entry.scene_id.encode()), int(entry.candidate_id)])

    def predict(self, entry, scene=None):
        truth = self.base.predict(entry, scene)
        if self.level == "composed":
            return truth
        rng = self._rng(entry)
        u = rng.random(len(SUBSCORE_NAMES))
        noise = rng.uniform(-self.eps, self.eps, len(SUBSCORE_NAMES))
        pick = rng.random(len(SUBSCORE_NAMES))
        values = truth.as_dict()
        for j, name in enumerate(SUBSCORE_NAMES):
            v = values[name]
            if name in LEVELS:
                if u[j] < self.p_flip:
                    others = [lv for lv in LEVELS[name] if lv != v] or list(LEVELS[name])
                    v = others[min(int(pick[j] * len(others)), len(others) - 1)]
            else:
                v = min(1.0, max(0.0, v + noise[j]))
            values[name] = v
        return SubScores(**values)

    def composed(self, entry, scene=None, weights=DEPLOYMENT):
        if self.level == "subscores":
            return super().composed(entry, scene, weights)
        s = compose(self.base.predict(entry, scene), weights)
        return min(1.0, max(0.0, s + self._rng(entry).uniform(-self.eps, self.eps)))


class TabularScorer(Scorer):
    """Looks up predictions by ``(scene_id, candidate_id)``."""

    def __init__(self, table: Mapping[tuple, SubScores]):
        self.table = {(str(k[0]), int(k[1])): v for k, v in table.items()}

    @classmethod
    def from_records(cls, records) -> "TabularScorer":
        return cls({(r["scene_id"], r["candidate_id"]): SubScores.from_mapping({n: r[n] for n in SUBSCORE_NAMES})
                    for r in records})

    def predict(self, entry, scene=None):
        key = (entry.scene_id, int(entry.candidate_id))
        if key not in self.table:
            raise InvalidInput(f"no tabulated prediction for scene {key[0]!r} candidate {key[1]}")
        return self.table[key]


def order_by_score(scores: Sequence[float]) -> np.ndarray:
    """Indices by score descending, ties to the lower index."""
    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(len(scores)), -scores))


@dataclass(frozen=True)
class RankResult:
    order: tuple
    scores: tuple
    predicted: tuple

    @property
    def top1(self) -> int:
        return self.order[0]


def rank(pool, scorer: Scorer, scene: Optional[Scene] = None, weights: ScoreWeights = DEPLOYMENT) -> RankResult:
    """Order proposals by composed predicted score (descending, ties to lower index)."""
    entries = as_entries(pool, scene)
    if not entries:
        raise InvalidInput("cannot rank an empty pool")
    predicted = tuple(scorer.predict(e, scene) for e in entries)
    if isinstance(scorer, NoisyScorer) and scorer.level == "composed":
        scores = tuple(scorer.composed(e, scene, weights) for e in entries)
    else:
        scores = tuple(compose(p, weights) for p in predicted)
    return RankResult(tuple(int(i) for i in order_by_score(scores)), scores, predicted)


def topk_targets(pool, scorer: Scorer, scene: Optional[Scene] = None, k: int = 8,
                 weights: ScoreWeights = DEPLOYMENT, ranked: Optional[RankResult] = None) -> list[int]:
    ranked = ranked or rank(pool, scorer, scene, weights)
    return list(ranked.order[: max(0, min(k, len(ranked.order)))])


def non_dominated(vectors) -> np.ndarray:
    """Indices (ascending) of rows not dominated by any other row.

    ``a`` dominates ``b`` when ``a >= b`` everywhere and ``a > b`` somewhere.
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2:
        raise InvalidInput("expected an (n, m) array of objective vectors")
    n = len(V)
    if n == 0:
        return np.zeros(0, dtype=int)
    dominated = np.zeros(n, dtype=bool)
    # chunked to bound memory at n^2 * m
    chunk = max(1, 2_000_000 // max(1, n * V.shape[1]))
    for lo in range(0, n, chunk):
        A = V[lo: lo + chunk, None, :]
        ge = np.all(A >= V[None], axis=2)
        gt = np.any(A > V[None], axis=2)
        dominated |= np.any(ge & gt, axis=0)
    return np.flatnonzero(~dominated)


@dataclass(frozen=True)
class ParetoResult:
    members: tuple       # clamped target set, composed-score order
    front: tuple         # exact non-dominated set, ascending index
    truncated: bool
    padded: bool


def pareto_targets(pool, scorer: Scorer, scene: Optional[Scene] = None, max_size: int = 8, min_size: int = 2,
                   weights: ScoreWeights = DEPLOYMENT, components: Sequence[str] = SUBSCORE_NAMES,
                   ranked: Optional[RankResult] = None) -> ParetoResult:
    """Non-dominated proposals in predicted sub-score space, clamped by composed score."""
    if min_size > max_size:
        raise ValueError("min_size must not exceed max_size")
    ranked = ranked or rank(pool, scorer, scene, weights)
    V = np.array([p.as_vector(components) for p in ranked.predicted])
    front = tuple(int(i) for i in non_dominated(V))
    in_front = set(front)
    by_score = [i for i in ranked.order if i in in_front]
    members = by_score[:max_size]
    padded = False
    if len(members) < min_size:
        extra = [i for i in ranked.order if i not in in_front][: min_size - len(members)]
        padded = bool(extra)
        members += extra
    return ParetoResult(tuple(members), front, len(by_score) > max_size, padded)


def set_coverage_distance(student: Sequence[Trajectory], targets: Sequence[Trajectory],
                          heading_weight: float = 1.0) -> float:
    """Mean over targets of the L1 distance to the nearest student trajectory."""
    if not targets:
        return 0.0
    if not student:
        raise InvalidInput("student set is empty")
    return float(pairwise_l1(targets, student, heading_weight).min(axis=1).mean())


@dataclass(frozen=True)
class Stage1Weights:
    gt: float = 1.0
    pe: float = 0.5


@dataclass(frozen=True)
class Stage2Weights:
    traj: float = 0.1
    topk: float = 1.0
    pareto: float = 1.0
    stab: float = 0.05


def stage1_loss_terms(proposals: Sequence[Trajectory], gt: Trajectory, pseudo_experts: Sequence[Trajectory],
                      weights: Stage1Weights = Stage1Weights(), heading_weight: float = 1.0) -> dict:
    l_gt = set_coverage_distance(proposals, [gt], heading_weight)
    l_pe = set_coverage_distance(proposals, list(pseudo_experts), heading_weight)
    return {"L_gt": l_gt, "L_pe": l_pe, "total": weights.gt * l_gt + weights.pe * l_pe}


def stage2_gen_loss_terms(student: Sequence[Trajectory], gt: Trajectory, topk: Sequence[Trajectory],
                          pareto: Sequence[Trajectory], teacher: Sequence[Trajectory],
                          weights: Stage2Weights = Stage2Weights(), heading_weight: float = 1.0) -> dict:
    """Generator refinement terms. An empty Pareto set contributes 0 and sets ``pareto_empty``."""
    if len(student) != len(teacher):
        raise InvalidInput(f"student has {len(student)} proposals, teacher has {len(teacher)}")
    l_gt = set_coverage_distance(student, [gt], heading_weight)
    l_topk = set_coverage_distance(student, list(topk), heading_weight)
    l_par = set_coverage_distance(student, list(pareto), heading_weight)
    l_stab = (float(np.mean([trajectory_l1(s, t, heading_weight) for s, t in zip(student, teacher)]))
              if student else 0.0)
    total = weights.traj * l_gt + weights.topk * l_topk + weights.pareto * l_par + weights.stab * l_stab
    return {"L_gt": l_gt, "L_topk": l_topk, "L_pareto": l_par, "L_stab": l_stab, "total": total,
            "pareto_empty": len(pareto) == 0}


@dataclass(frozen=True)
class AnchorConfig:
    lambda_s: float = 2.0
    lambda_xy: float = 0.2
    lambda_psi: float = 0.5
    s_pos: float = 5.0
    s_psi: float = 0.35

    def __post_init__(self):
        if min(self.lambda_s, self.lambda_xy, self.lambda_psi) < 0:
            raise ValueError("anchor weights must be non-negative")
        if self.s_pos <= 0 or self.s_psi <= 0:
            raise ValueError("anchor scales must be positive")


def xy_rms(traj: Trajectory, anchor: Trajectory) -> float:
    d = traj.xy - anchor.xy
    return math.sqrt(float(np.mean(np.sum(d * d, axis=1))))


def head_rms(traj: Trajectory, anchor: Trajectory) -> float:
    d = wrap_angle(traj.heading - anchor.heading)
    return math.sqrt(float(np.mean(d * d)))


def anchor_q(score: float, xyrms: float, headrms: float, cfg: AnchorConfig = AnchorConfig()) -> float:
    penalty = cfg.lambda_xy * xyrms / cfg.s_pos + cfg.lambda_psi * headrms / cfg.s_psi
    return cfg.lambda_s * score - penalty


@dataclass(frozen=True)
class AnchorResult:
    order: tuple
    q: tuple
    xyrms: tuple
    headrms: tuple

    @property
    def top1(self) -> int:
        return self.order[0]


def anchor_rerank(pool: Sequence[Trajectory], predicted_scores: Sequence[float], anchor: Trajectory,
                  cfg: AnchorConfig = AnchorConfig()) -> AnchorResult:
    """Soft rerank by ``Q = lambda_s * s - penalty``; nothing is discarded."""
    trajs = [p.trajectory if isinstance(p, PoolEntry) else p for p in pool]
    if not trajs:
        raise InvalidInput("cannot rerank an empty pool")
    if len(trajs) != len(predicted_scores):
        raise InvalidInput("one predicted score per candidate is required")
    poses = np.stack([t.poses for t in trajs])
    d = poses - anchor.poses[None]
    xr = tuple(float(v) for v in np.sqrt(np.mean(np.sum(d[..., :2] ** 2, axis=2), axis=1)))
    hr = tuple(float(v) for v in np.sqrt(np.mean(wrap_angle(d[..., 2]) ** 2, axis=1)))
    q = tuple(anchor_q(float(s), a, b, cfg) for s, a, b in zip(predicted_scores, xr, hr))
    # with both anchor weights off, rank exactly by score so float scaling cannot reorder ties
    key = predicted_scores if cfg.lambda_xy == 0 and cfg.lambda_psi == 0 and cfg.lambda_s > 0 else q
    return AnchorResult(tuple(int(i) for i in order_by_score(key)), q, xr, hr)


def switch_count(selections: Sequence[int]) -> int:
    """Number of frame-to-frame changes in the selected candidate."""
    return sum(1 for a, b in zip(selections, selections[1:]) if a != b)


@dataclass(frozen=True)
class SelectionReport:
    selected_index: int
    selected_true_score: float
    oracle_true_score: float
    regret: float
    topk_oracle: dict = field(default_factory=dict)
    topk_mean: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"selected_index": self.selected_index, "selected_true_score": self.selected_true_score,
                "oracle_true_score": self.oracle_true_score, "regret": self.regret,
                "topk_oracle": {str(k): v for k, v in self.topk_oracle.items()},
                "topk_mean": {str(k): v for k, v in self.topk_mean.items()}}


def selection_report(true_scores: Sequence[float], order: Sequence[int], ks: Sequence[int] = (1, 2, 3, 6)
                     ) -> SelectionReport:
    """Selected vs oracle accounting for one pool given the scorer ordering."""
    r = np.asarray(true_scores, dtype=float)
    if len(r) == 0 or len(order) != len(r):
        raise InvalidInput("order must be a permutation of a non-empty pool")
    top1 = int(order[0])
    O, V = float(r.max()), float(r[top1])
    topk_oracle, topk_mean = {}, {}
    for k in ks:
        head = r[list(order[: min(k, len(r))])]
        topk_oracle[int(k)] = float(head.max())
        topk_mean[int(k)] = float(head.mean())
    return SelectionReport(top1, V, O, O - V, topk_oracle, topk_mean)

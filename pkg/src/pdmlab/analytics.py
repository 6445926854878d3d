"""Proposal-set quality and diversity metrics.

Pools are sequences of trajectories (``Trajectory`` objects or ``(T, >=2)``
arrays); only ``(x, y)`` enters the geometric metrics. Degenerate subsets
(fewer than two members) yield zeros plus an ``empty`` flag so that batch
reports stay rectangular.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import hull_area
from .scene import Trajectory

CLUSTER_RADII = (1.0, 2.0, 3.0, 4.0)
TOPK_KS = (1, 2, 3, 6)


def pool_xy(pool) -> np.ndarray:
    """``(N, T, 2)`` array of positions."""
    if isinstance(pool, np.ndarray):
        arr = pool
    else:
        arr = np.stack([p.xy if isinstance(p, Trajectory) else np.asarray(p, dtype=float) for p in pool]) \
            if len(pool) else np.zeros((0, 1, 2))
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 3 or arr.shape[2] < 2:
        raise ValueError(f"expected (N, T, >=2) trajectories, got shape {arr.shape}")
    return arr[..., :2]


def pairwise_ade_fde(pool) -> tuple[float, float]:
    """Mean over unordered pairs of mean per-step and final-step Euclidean distance.

    Fewer than two trajectories give ``(0, 0)``.
    """
    xy = pool_xy(pool)
    n = len(xy)
    if n < 2:
        return 0.0, 0.0
    iu, ju = np.triu_indices(n, k=1)
    d = np.linalg.norm(xy[iu] - xy[ju], axis=2)
    return float(d.mean()), float(d[:, -1].mean())


def endpoint_spread(pool) -> tuple[float, float]:
    """Radial RMS of endpoints about their centroid, and their convex-hull area."""
    xy = pool_xy(pool)
    if len(xy) == 0:
        return 0.0, 0.0
    ends = xy[:, -1]
    dev = ends - ends.mean(axis=0)
    return math.sqrt(float(np.mean(np.sum(dev * dev, axis=1)))), hull_area(ends)


def effective_rank(pool, rel_tol: float = 1e-10) -> float:
    """``exp`` of the entropy of the normalised singular values of the centred flattened pool.

    Singular values below ``rel_tol`` times the largest are treated as zero;
    a pool without any deviation returns 1.
    """
    xy = pool_xy(pool)
    if len(xy) < 2:
        return 1.0
    X = xy.reshape(len(xy), -1)
    X = X - X.mean(axis=0)
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size == 0 or sv[0] <= 0:
        return 1.0
    sv = sv[sv > rel_tol * sv[0]]
    p = sv / sv.sum()
    return float(math.exp(-np.sum(p * np.log(p))))


def endpoint_clusters(pool, radius: float) -> int:
    """Greedy clustering in pool order: join the first cluster whose seed is within ``radius``."""
    xy = pool_xy(pool)
    seeds: list = []
    for e in xy[:, -1]:
        if not any(math.hypot(e[0] - s[0], e[1] - s[1]) <= radius for s in seeds):
            seeds.append(e)
    return len(seeds)


def top_n_by_score(scores: Sequence[float], n: int) -> np.ndarray:
    """Indices of the ``n`` highest scores, ties to the lower index."""
    s = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(len(s)), -s))[: min(n, len(s))]


@dataclass(frozen=True)
class QualityAware:
    qualified_count: int
    qualified_cluster_count_2m: int
    qualified_pairwise_ade: float
    qualified_pairwise_fde: float
    qualified_empty: bool
    top6_real_pairwise_ade: float
    top6_real_pairwise_fde: float


def quality_aware(pool, true_scores: Sequence[float], qualify_threshold: float = 0.8, top_n: int = 6,
                  cluster_radius: float = 2.0) -> QualityAware:
    xy = pool_xy(pool)
    s = np.asarray(true_scores, dtype=float)
    if len(s) != len(xy):
        raise ValueError("one true score per trajectory is required")
    q = xy[s >= qualify_threshold]
    top = xy[np.sort(top_n_by_score(s, top_n))]
    qa, qf = pairwise_ade_fde(q)
    ta, tf = pairwise_ade_fde(top)
    return QualityAware(int(len(q)), endpoint_clusters(q, cluster_radius) if len(q) else 0, qa, qf,
                        len(q) == 0, ta, tf)


def topk_tables(true_scores: Sequence[float], order: Sequence[int], ks: Sequence[int] = TOPK_KS) -> dict:
    """TopK-Oracle@K (best) and TopK-Mean@K (mean) true score over the scorer's first K."""
    s = np.asarray(true_scores, dtype=float)
    order = np.asarray(order, dtype=int)
    if len(s) == 0 or sorted(order.tolist()) != list(range(len(s))):
        raise ValueError("order must be a permutation of a non-empty pool")
    out = {"oracle": {}, "mean": {}}
    for k in ks:
        head = s[order[: min(k, len(s))]]
        out["oracle"][int(k)] = float(head.max())
        out["mean"][int(k)] = float(head.mean())
    return out


@dataclass(frozen=True)
class PoolStats:
    selected_pdms: float
    oracle_at_64: float
    gap: float
    mean_pdms: float
    std_pdms: float
    count_gt_095: int
    count_gt_090: int
    count_lt_050: int
    pairwise_ade: float
    pairwise_fde: float
    endpoint_std_radius: float
    endpoint_area: float
    effective_rank: float
    cluster_count_1m: int
    cluster_count_2m: int
    cluster_count_3m: int
    cluster_count_4m: int
    qualified_count: int
    qualified_cluster_count_2m: int
    qualified_pairwise_ade: float
    qualified_pairwise_fde: float
    top6_real_pairwise_ade: float
    top6_real_pairwise_fde: float
    pool_size: int

    def as_dict(self) -> dict:
        return asdict(self)


POOL_STATS_FIELDS = tuple(PoolStats.__dataclass_fields__)


def pool_stats(pool, true_scores: Sequence[float], selected_index: Optional[int] = None) -> PoolStats:
    """Every quality and diversity metric for one scene's pool.

    ``selected_index`` is the scorer's pick; without it the oracle pick is used.
    """
    xy = pool_xy(pool)
    s = np.asarray(true_scores, dtype=float)
    if len(s) == 0 or len(s) != len(xy):
        raise ValueError("need a non-empty pool with one true score per trajectory")
    sel = int(np.argmax(s)) if selected_index is None else int(selected_index)
    ade, fde = pairwise_ade_fde(xy)
    rad, area = endpoint_spread(xy)
    qa = quality_aware(xy, s)
    clusters = [endpoint_clusters(xy, r) for r in CLUSTER_RADII]
    return PoolStats(
        selected_pdms=float(s[sel]), oracle_at_64=float(s.max()), gap=float(s.max() - s[sel]),
        mean_pdms=float(s.mean()), std_pdms=float(s.std()),
        count_gt_095=int((s > 0.95).sum()), count_gt_090=int((s > 0.90).sum()), count_lt_050=int((s < 0.50).sum()),
        pairwise_ade=ade, pairwise_fde=fde, endpoint_std_radius=rad, endpoint_area=area,
        effective_rank=effective_rank(xy),
        cluster_count_1m=clusters[0], cluster_count_2m=clusters[1], cluster_count_3m=clusters[2],
        cluster_count_4m=clusters[3],
        qualified_count=qa.qualified_count, qualified_cluster_count_2m=qa.qualified_cluster_count_2m,
        qualified_pairwise_ade=qa.qualified_pairwise_ade, qualified_pairwise_fde=qa.qualified_pairwise_fde,
        top6_real_pairwise_ade=qa.top6_real_pairwise_ade, top6_real_pairwise_fde=qa.top6_real_pairwise_fde,
        pool_size=int(len(s)),
    )


def aggregate_stats(stats: Sequence[PoolStats]) -> dict:
    """Field-wise mean over scenes."""
    if not stats:
        raise ValueError("no pool statistics to aggregate")
    return {f: float(np.mean([getattr(s, f) for s in stats])) for f in POOL_STATS_FIELDS}

"""Exact-arithmetic checks of the refinement guarantees.

Proposal distributions are finite weighted supports over items with known
true scores. Updates mix the current distribution with a selected target
distribution and optionally move a bounded amount of mass (total variation
``eta``) to model an imperfect generator update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .selection import non_dominated

TOL = 1e-12


class InvalidDistribution(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteProposalDistribution:
    """Weighted support. ``keys`` identify items so that mixtures merge shared atoms."""
    scores: np.ndarray
    probs: np.ndarray
    keys: Optional[np.ndarray] = None
    payload: Optional[tuple] = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        k = np.arange(len(s)) if self.keys is None else np.asarray(self.keys)
        if s.ndim != 1 or s.shape != p.shape or k.shape != s.shape:
            raise InvalidDistribution("scores, probs and keys must be equal-length vectors")
        if len(s) == 0:
            raise InvalidDistribution("empty support")
        if np.any(p < -TOL) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidDistribution(f"probabilities must be non-negative and sum to 1 (sum={p.sum()!r})")
        if np.any((s < 0) | (s > 1)) or not np.all(np.isfinite(s)):
            raise InvalidDistribution("true scores must lie in [0, 1]")
        if len(np.unique(k)) != len(k):
            raise InvalidDistribution("duplicate item keys")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))
        object.__setattr__(self, "keys", k)

    @classmethod
    def _derived(cls, scores, probs, keys) -> "DiscreteProposalDistribution":
        # internal results of exact operations on validated inputs skip re-validation
        obj = object.__new__(cls)
        object.__setattr__(obj, "scores", scores)
        object.__setattr__(obj, "probs", probs)
        object.__setattr__(obj, "keys", keys)
        object.__setattr__(obj, "payload", None)
        return obj

    @classmethod
    def uniform(cls, scores, keys=None) -> "DiscreteProposalDistribution":
        s = np.asarray(scores, dtype=float)
        return cls(s, np.full(len(s), 1.0 / len(s)), keys)

    def mean(self) -> float:
        return float(self.probs @ self.scores)

    def restrict(self, mask) -> "DiscreteProposalDistribution":
        """Condition on a subset of the support (same keys, renormalised)."""
        mask = np.asarray(mask, dtype=bool)
        w = np.where(mask, self.probs, 0.0)
        if w.sum() <= 0:
            raise InvalidDistribution("restriction has zero mass")
        return DiscreteProposalDistribution._derived(self.scores, w / w.sum(), self.keys)

    def sample(self, n: int, rng: np.random.Generator) -> "DiscreteProposalDistribution":
        """Empirical distribution of ``n`` draws (sampling mode)."""
        counts = rng.multinomial(n, self.probs / self.probs.sum())
        keep = counts > 0
        return DiscreteProposalDistribution(self.scores[keep], counts[keep] / n, self.keys[keep])


def tv_distance(a: DiscreteProposalDistribution, b: DiscreteProposalDistribution) -> float:
    keys = np.union1d(a.keys, b.keys)
    pa = np.zeros(len(keys))
    pb = np.zeros(len(keys))
    pa[np.searchsorted(keys, a.keys)] = a.probs
    pb[np.searchsorted(keys, b.keys)] = b.probs
    return 0.5 * float(np.abs(pa - pb).sum())


def mixture(mu: DiscreteProposalDistribution, nu: DiscreteProposalDistribution,
            alpha: float) -> DiscreteProposalDistribution:
    """``(1 - alpha) mu + alpha nu`` on the union of supports."""
    if mu.keys.shape == nu.keys.shape and np.array_equal(mu.keys, nu.keys):
        if mu.scores is not nu.scores and not np.array_equal(mu.scores, nu.scores):
            raise InvalidDistribution("shared keys carry different scores")
        return DiscreteProposalDistribution._derived(mu.scores, (1 - alpha) * mu.probs + alpha * nu.probs, mu.keys)
    keys = np.union1d(mu.keys, nu.keys)
    scores = np.full(len(keys), np.nan)
    probs = np.zeros(len(keys))
    for d, w in ((mu, 1 - alpha), (nu, alpha)):
        idx = np.searchsorted(keys, d.keys)
        prev = scores[idx]
        if np.any(np.isfinite(prev) & (prev != d.scores)):
            raise InvalidDistribution("shared keys carry different scores")
        scores[idx] = d.scores
        probs[idx] += w * d.probs
    return DiscreteProposalDistribution(scores, probs, keys)


def perturb_tv(dist: DiscreteProposalDistribution, eta: float, mode: str = "adversarial",
               rng: Optional[np.random.Generator] = None) -> DiscreteProposalDistribution:
    """Move at most ``eta`` mass within the support.

    ``adversarial`` drains the highest-score items into the lowest-score item;
    ``random`` drains items in a seeded random order into a random item.
    """
    if eta <= 0:
        return dist
    p = dist.probs.copy()
    if mode == "adversarial":
        dest = int(np.lexsort((np.arange(len(p)), dist.scores))[0])
        sources = np.lexsort((np.arange(len(p)), -dist.scores))
    elif mode == "random":
        rng = rng or np.random.default_rng(0)
        dest = int(rng.integers(len(p)))
        sources = rng.permutation(len(p))
    else:
        raise ValueError(f"unknown perturbation mode {mode!r}")
    budget = min(eta, 1.0)
    for i in sources:
        if budget <= 0:
            break
        if i == dest:
            continue
        take = min(p[i], budget)
        p[i] -= take
        p[dest] += take
        budget -= take
    return DiscreteProposalDistribution._derived(dist.scores, p, dist.keys)


def high_score_mass(dist: DiscreteProposalDistribution, r_high: float) -> float:
    return float(dist.probs[dist.scores >= r_high].sum())


@dataclass(frozen=True)
class EnrichmentStepConfig:
    alpha: float
    eta: float = 0.0
    r_high: float = 0.95
    seed: int = 0
    mode: str = "adversarial"

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")


@dataclass(frozen=True)
class BoundReport:
    p_before: float
    q_target: float
    p_after: float
    xi: float
    alpha: float
    eta: float
    lower_bound: float
    satisfied: bool
    slack: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _report(before: float, target: float, after: float, alpha: float, eta: float) -> BoundReport:
    xi = target - before
    lb = before + alpha * xi - eta
    slack = after - lb
    return BoundReport(before, target, after, xi, alpha, eta, lb, bool(slack >= -TOL), slack)


def _update(mu, nu, cfg: EnrichmentStepConfig, rng=None):
    mixed = mixture(mu, nu, cfg.alpha)
    if cfg.eta > 0:
        rng = rng or np.random.default_rng(cfg.seed)
        mixed = perturb_tv(mixed, cfg.eta, cfg.mode, rng)
    return mixed


def enrichment_step(mu: DiscreteProposalDistribution, nu: DiscreteProposalDistribution,
                    cfg: EnrichmentStepConfig) -> tuple[DiscreteProposalDistribution, BoundReport]:
    """High-score mass after a conservative update, checked against ``p + alpha*xi - eta``."""
    new = _update(mu, nu, cfg)
    rep = _report(high_score_mass(mu, cfg.r_high), high_score_mass(nu, cfg.r_high),
                  high_score_mass(new, cfg.r_high), cfg.alpha, cfg.eta)
    return new, rep


def expected_score_step(mu: DiscreteProposalDistribution, nu: DiscreteProposalDistribution,
                        cfg: EnrichmentStepConfig) -> tuple[DiscreteProposalDistribution, BoundReport]:
    """Expectation version: ``xi`` in the report is ``beta = E_nu - E_mu``."""
    new = _update(mu, nu, cfg)
    return new, _report(mu.mean(), nu.mean(), new.mean(), cfg.alpha, cfg.eta)


Selector = Callable[[DiscreteProposalDistribution, np.random.Generator], DiscreteProposalDistribution]


def top_fraction_selector(fraction: float = 0.25, noise: float = 0.0) -> Selector:
    """Condition on the items whose (optionally noisy) score is in the top ``fraction`` of the support."""
    def select(mu, rng):
        s = mu.scores + (rng.uniform(-noise, noise, len(mu.scores)) if noise > 0 else 0.0)
        live = mu.probs > 0
        k = max(1, int(math.ceil(fraction * live.sum())))
        order = np.lexsort((np.arange(len(s)), -np.where(live, s, -np.inf)))
        mask = np.zeros(len(s), dtype=bool)
        mask[order[:k]] = True
        return mu.restrict(mask)
    return select


@dataclass(frozen=True)
class MultiRoundReport:
    rounds: tuple
    e_initial: float
    e_final: float
    cumulative_bound: float
    satisfied: bool
    slack: float
    guaranteed_gain: bool

    def as_dict(self) -> dict:
        return {"rounds": [r.as_dict() for r in self.rounds], "e_initial": self.e_initial,
                "e_final": self.e_final, "cumulative_bound": self.cumulative_bound,
                "satisfied": self.satisfied, "slack": self.slack, "guaranteed_gain": self.guaranteed_gain}


def multi_round(mu0: DiscreteProposalDistribution, selector: Selector, cfg: EnrichmentStepConfig,
                rounds: int, alphas: Optional[Sequence[float]] = None,
                etas: Optional[Sequence[float]] = None) -> MultiRoundReport:
    """Iterate expected-score steps and check the telescoped bound.

    ``guaranteed_gain`` is ``sum(alpha*beta) > sum(eta)``; when false the
    bound is vacuous rather than violated.
    """
    rng = np.random.default_rng(cfg.seed)
    alphas = [cfg.alpha] * rounds if alphas is None else list(alphas)
    etas = [cfg.eta] * rounds if etas is None else list(etas)
    mu = mu0
    reps = []
    for t in range(rounds):
        nu = selector(mu, rng)
        step = EnrichmentStepConfig(alphas[t], etas[t], cfg.r_high, cfg.seed, cfg.mode)
        mu, rep = _expectation_step(mu, nu, step, rng)
        reps.append(rep)
    gain = sum(r.alpha * r.xi for r in reps)
    loss = sum(r.eta for r in reps)
    bound = mu0.mean() + gain - loss
    slack = mu.mean() - bound
    return MultiRoundReport(tuple(reps), mu0.mean(), mu.mean(), bound, bool(slack >= -1e-10), slack, gain > loss)


def _expectation_step(mu, nu, cfg, rng):
    new = _update(mu, nu, cfg, rng)
    return new, _report(mu.mean(), nu.mean(), new.mean(), cfg.alpha, cfg.eta)


def oracle_at_k(p: float, K: int) -> float:
    """Probability that ``K`` independent draws contain at least one high-score proposal."""
    if not 0 <= p <= 1 or K < 0:
        raise ValueError("need p in [0, 1] and K >= 0")
    return 1.0 - (1.0 - p) ** K


def oracle_lower_bound(p: float, K: int, r_min: float, r_high: float) -> float:
    return r_min + (r_high - r_min) * oracle_at_k(p, K)


@dataclass(frozen=True)
class MonotonicityReport:
    j_true_before: float
    j_true_after: float
    j_sur_before: float
    j_sur_after: float
    eps: float
    alpha: float
    premise_ok: bool
    bound: float
    satisfied: bool
    slack: float
    change: float


def monotonicity_check(pi_t: DiscreteProposalDistribution, pi_next: DiscreteProposalDistribution,
                       surrogate_t, surrogate_next, eps: float, alpha: float) -> MonotonicityReport:
    """Check ``J*(pi') >= J*(pi) - 2 eps - alpha`` for one update.

    ``surrogate_*`` are the scorer's per-item values on each support. The
    premises are ``|J_s - J*| <= eps`` on both policies and
    ``J_s(pi') >= J_s(pi) - alpha``.
    """
    jt0, jt1 = pi_t.mean(), pi_next.mean()
    js0 = float(pi_t.probs @ np.asarray(surrogate_t, dtype=float))
    js1 = float(pi_next.probs @ np.asarray(surrogate_next, dtype=float))
    premise = (abs(js0 - jt0) <= eps + TOL and abs(js1 - jt1) <= eps + TOL and js1 >= js0 - alpha - TOL)
    bound = jt0 - 2 * eps - alpha
    slack = jt1 - bound
    return MonotonicityReport(jt0, jt1, js0, js1, eps, alpha, premise, bound, bool(slack >= -TOL), slack, jt1 - jt0)


def monotonicity_worst_case(eps: float = 0.05, base: float = 0.5) -> MonotonicityReport:
    """Instance where the true score drops by exactly ``2 eps`` at zero surrogate change."""
    pi_t = DiscreteProposalDistribution(np.array([base + eps]), np.array([1.0]), np.array([0]))
    pi_n = DiscreteProposalDistribution(np.array([base - eps]), np.array([1.0]), np.array([1]))
    return monotonicity_check(pi_t, pi_n, [base], [base], eps, 0.0)


@dataclass(frozen=True)
class DriftReport:
    T: int
    eps: float
    rho: float
    refit: tuple
    fixed: tuple
    refit_bound: tuple
    fixed_bound: tuple
    refit_ok: bool
    fixed_ok: bool
    tv_steps: tuple


def drift_experiment(T: int, eps: float, rho: float, seed: int = 0, jitter: float = 0.0) -> DriftReport:
    """Cumulative expected scorer error under steady distribution drift.

    Each step moves ``rho`` mass from the oldest populated atoms onto a new
    atom, so ``TV(pi_{t+1}, pi_t) = rho`` exactly. A scorer fitted on
    ``pi_t`` has error at most ``eps`` on its support and error up to 1 on
    atoms it has never seen. The refit scorer is refitted every step; the
    fixed scorer keeps the fit on ``pi_0``. ``jitter`` in ``[0, 1)`` draws
    seeded per-atom errors below those caps.
    """
    if not 0 <= rho <= 1 or eps < 0 or T < 1:
        raise ValueError("need rho in [0, 1], eps >= 0, T >= 1")
    rng = np.random.default_rng(seed)
    n_atoms = T + 1
    fit_err = eps * (1.0 - jitter * rng.random(n_atoms))
    new_err = 1.0 - jitter * 0.5 * rng.random(n_atoms)
    probs = np.zeros(n_atoms)
    probs[0] = 1.0
    refit, fixed, tvs = [], [], []
    cum_r = cum_f = 0.0
    for t in range(T):
        support = probs > 0
        nxt = probs.copy()
        budget = rho
        for i in range(t + 1):
            take = min(nxt[i], budget)
            nxt[i] -= take
            budget -= take
        nxt[t + 1] += rho - budget
        tvs.append(0.5 * float(np.abs(nxt - probs).sum()))
        g_refit = np.where(support, fit_err, new_err)
        g_fixed = np.where(np.arange(n_atoms) == 0, fit_err, new_err)
        cum_r += float(nxt @ g_refit)
        cum_f += float(nxt @ g_fixed)
        refit.append(cum_r)
        fixed.append(cum_f)
        probs = nxt
    ts = np.arange(1, T + 1)
    rb = tuple(float(t * eps + t * rho) for t in ts)
    fb = tuple(float(t * eps + t * (t + 1) / 2 * rho) for t in ts)
    return DriftReport(T, eps, rho, tuple(refit), tuple(fixed), rb, fb,
                       all(r <= b + 1e-9 for r, b in zip(refit, rb)),
                       all(f <= b + 1e-9 for f, b in zip(fixed, fb)), tuple(tvs))


def growth_exponent(Ts: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(values)`` against ``log(T)``."""
    x = np.log(np.asarray(Ts, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def drift_growth(Ts: Sequence[int] = (4, 8, 16, 32, 64), eps: float = 0.02, rho: float = 0.05,
                 seed: int = 0, jitter: float = 0.0) -> dict:
    reps = [drift_experiment(T, eps, rho, seed, jitter) for T in Ts]
    refit = [r.refit[-1] for r in reps]
    fixed = [r.fixed[-1] for r in reps]
    return {"T": list(Ts), "refit": refit, "fixed": fixed,
            "refit_bound": [r.refit_bound[-1] for r in reps], "fixed_bound": [r.fixed_bound[-1] for r in reps],
            "refit_ok": all(r.refit_ok for r in reps), "fixed_ok": all(r.fixed_ok for r in reps),
            "refit_slope": growth_exponent(Ts, refit), "fixed_slope": growth_exponent(Ts, fixed)}


def approx_pareto_set(vectors, margin: float, reference=None) -> np.ndarray:
    """Indices of ``vectors`` not beaten by ``margin`` in every objective by any row of ``reference``."""
    V = np.asarray(vectors, dtype=float)
    R = V if reference is None else np.asarray(reference, dtype=float)
    beaten = np.all(R[:, None, :] >= V[None, :, :] + margin, axis=2).any(axis=0)
    return np.flatnonzero(~beaten)


@dataclass(frozen=True)
class ParetoConsistencyReport:
    delta: float
    kappa: float
    scorer_front: tuple
    approx_front: tuple
    contained: bool
    coverage_contained: Optional[bool] = None


def pareto_consistency_check(true_vectors, delta: float, kappa: float, seed: int = 0,
                             lipschitz: Optional[float] = None, eta: Optional[float] = None,
                             predicted=None) -> ParetoConsistencyReport:
    """Check that the scorer front lies in the true ``(2 delta + kappa)``-approximate front.

    Predictions are the true vectors plus seeded ``U(-delta, delta)`` errors
    unless ``predicted`` is given. With ``lipschitz`` and ``eta`` set, each
    scorer-front item is also replaced by a covering proposal whose true
    vector moves by at most ``lipschitz * eta`` and checked against the wider
    margin.
    """
    R = np.asarray(true_vectors, dtype=float)
    rng = np.random.default_rng(seed)
    S = R + rng.uniform(-delta, delta, R.shape) if predicted is None else np.asarray(predicted, dtype=float)
    if np.any(np.abs(S - R) > delta + TOL):
        raise ValueError("predictions violate the uniform error bound")
    front = non_dominated(S)
    approx = approx_pareto_set(R, 2 * delta + kappa)
    contained = bool(set(front.tolist()) <= set(approx.tolist()))
    cov = None
    if lipschitz is not None and eta is not None:
        shift = lipschitz * eta
        covered = R[front] + rng.uniform(-shift, shift, (len(front), R.shape[1]))
        ok = approx_pareto_set(covered, 2 * delta + kappa + shift, reference=R)
        cov = len(ok) == len(front)
    return ParetoConsistencyReport(delta, kappa, tuple(front.tolist()), tuple(approx.tolist()), contained, cov)


def pareto_boundary_case(delta: float = 0.25, kappa: float = 1e-6) -> dict:
    """Two items whose true margin is exactly ``2 delta`` with worst-case scorer errors.

    The scorer sees them as equal, so both stay on its front; the lower one
    leaves the true ``2 delta``-approximate front but stays in the
    ``(2 delta + kappa)`` one.
    """
    R = np.array([[0.25, 0.25], [0.25 + 2 * delta, 0.25 + 2 * delta]])
    S = np.array([R[0] + delta, R[1] - delta])
    front = set(non_dominated(S).tolist())
    return {"scorer_front": sorted(front),
            "in_2delta": bool(front <= set(approx_pareto_set(R, 2 * delta).tolist())),
            "in_2delta_kappa": bool(front <= set(approx_pareto_set(R, 2 * delta + kappa).tolist()))}


def _elite_reject_margin(r: np.ndarray, s: np.ndarray, a: float, b: float, q: Optional[float]) -> bool:
    top, bottom = r.max(), r.min()
    elite = r >= top - a
    reject = r <= bottom + b
    if elite.sum() == 0 or reject.sum() == 0 or np.any(elite & reject):
        return False
    gamma = r[elite].min() - r[reject].max()
    err = np.abs(s - r)
    e = err.max() if q is None else float(np.percentile(err, q))
    return bool(gamma > 2 * e)


def pairwise_accuracy(r: np.ndarray, s: np.ndarray, high: float = 0.95, low: float = 0.50) -> tuple[float, int]:
    """Fraction of (high, low) pairs ordered correctly by ``s``; ties count one half."""
    hi = s[r >= high]
    lo = s[r <= low]
    if len(hi) == 0 or len(lo) == 0:
        return 0.0, 0
    d = hi[:, None] - lo[None, :]
    return float(((d > 0).sum() + 0.5 * (d == 0).sum()) / d.size), d.size


def enrichment_report(pools: Sequence[tuple], ks: Sequence[int] = (1, 2, 3, 6)) -> dict:
    """Diagnostic table over per-scene ``(true_scores, predicted_scores)`` pools.

    Elite items are within ``a`` of the scene's best true score, reject items
    within ``b`` of its worst; ``gamma`` is the gap between the groups and
    ``eps_pX`` the X-th percentile of absolute scorer error in the scene.
    """
    pools = [(np.asarray(r, dtype=float), np.asarray(s, dtype=float)) for r, s in pools]
    if not pools:
        raise ValueError("no pools")
    R = np.concatenate([r for r, _ in pools])
    S = np.concatenate([s for _, s in pools])
    full = R >= 1.0 - TOL
    out: dict = {"n_scenes": len(pools), "n_candidates": int(len(R)),
                 "pooled_full_score_rate": float(full.mean())}
    out["margin_max_0.05"] = float(np.mean([_elite_reject_margin(r, s, 0.05, 0.05, None) for r, s in pools]))
    for q in (75, 90, 95):
        out[f"margin_p{q}_0.01"] = float(np.mean([_elite_reject_margin(r, s, 0.01, 0.01, q) for r, s in pools]))
    correct = total = 0.0
    for r, s in pools:
        c, n = pairwise_accuracy(r, s)
        correct += c * n
        total += n
    out["pairwise_accuracy"] = correct / total if total else float("nan")
    for thr in (0.90, 0.95):
        sel = S >= thr
        key = f"s>={thr:.2f}"
        if sel.any():
            out[key] = {"count": int(sel.sum()), "mean_true": float(R[sel].mean()),
                        "p_true_ge_0.90": float((R[sel] >= 0.90).mean()),
                        "p_true_full": float(full[sel].mean())}
        else:
            out[key] = {"count": 0}
    sel = S >= 0.95
    out["enrichment_gap"] = float(full[sel].mean() - full.mean()) if sel.any() else float("nan")
    topk = {}
    for k in ks:
        best, gaps = [], []
        for r, s in pools:
            order = np.lexsort((np.arange(len(s)), -s))[: min(k, len(s))]
            best.append(r[order].max())
            gaps.append(r.max() - r[order].max())
        topk[str(k)] = {"mean_best_true": float(np.mean(best)), "oracle_gap": float(np.mean(gaps))}
    out["topk"] = topk
    return out

"""Seeded trial generators for the bound checks.

Every trial draws from ``default_rng([seed, trial])`` so results do not
depend on how trials are scheduled.
"""

from __future__ import annotations

from typing import Callable, Mapping, Optional

import numpy as np

from .evaluator import PDMS_V1, SubScores
from .refinement import (
    DiscreteProposalDistribution, EnrichmentStepConfig, drift_growth, enrichment_report, enrichment_step,
    expected_score_step, monotonicity_check, multi_round, pareto_consistency_check, top_fraction_selector,
)
from .selection import NoisyScorer, PoolEntry, rank

CHECKS = ("enrichment", "expected", "multiround", "monotone", "drift", "pareto", "margin", "report")

DEFAULTS = {
    "enrichment": {"max_items": 32, "max_eta": 0.2, "r_high": 0.95, "mode": "adversarial", "full_rate": 0.35},
    "expected": {"max_items": 32, "max_eta": 0.2, "mode": "adversarial", "full_rate": 0.35},
    "multiround": {"max_items": 32, "max_eta": 0.05, "rounds": 10, "fraction": 0.3, "noise": 0.1,
                   "mode": "adversarial", "full_rate": 0.35},
    "monotone": {"max_items": 16, "eps": 0.05, "max_alpha": 0.05},
    "drift": {"eps": 0.02, "rho": 0.05, "T": [4, 8, 16, 32, 64], "jitter": 0.5},
    "pareto": {"n": 50, "M": 3, "delta": 0.05, "kappa": 1e-6, "L": 1.0, "eta": 0.1},
    "margin": {"max_items": 40, "eps": 0.05, "extra_margin": 0.05},
    "report": {"proposals": 64, "full_rate": 0.3542, "noise_scale": 0.04},
}


def _scores(rng: np.random.Generator, n: int, full_rate: float) -> np.ndarray:
    s = rng.random(n)
    s[rng.random(n) < full_rate] = 1.0
    return s


def _dist(rng, scores) -> DiscreteProposalDistribution:
    return DiscreteProposalDistribution(scores, rng.dirichlet(np.ones(len(scores))))


def _step_trial(rng, p, expectation: bool) -> dict:
    n = int(rng.integers(2, p["max_items"] + 1))
    s = _scores(rng, n, p["full_rate"])
    mu, nu = _dist(rng, s), _dist(rng, s)
    cfg = EnrichmentStepConfig(float(rng.random()), float(rng.random() * p["max_eta"]),
                               p.get("r_high", 0.95), int(rng.integers(2**31)), p["mode"])
    _, r = (expected_score_step if expectation else enrichment_step)(mu, nu, cfg)
    return {"n": n, "before": r.p_before, "target": r.q_target, "after": r.p_after, "alpha": r.alpha,
            "eta": r.eta, "bound": r.lower_bound, "slack": r.slack, "ok": r.satisfied}


def trial_enrichment(rng, p):
    return _step_trial(rng, p, expectation=False)


def trial_expected(rng, p):
    return _step_trial(rng, p, expectation=True)


def trial_multiround(rng, p):
    n = int(rng.integers(2, p["max_items"] + 1))
    mu = _dist(rng, _scores(rng, n, p["full_rate"]))
    cfg = EnrichmentStepConfig(float(rng.random()), float(rng.random() * p["max_eta"]), 0.95,
                               int(rng.integers(2**31)), p["mode"])
    r = multi_round(mu, top_fraction_selector(p["fraction"], p["noise"]), cfg, int(p["rounds"]))
    return {"n": n, "before": r.e_initial, "after": r.e_final, "alpha": cfg.alpha, "eta": cfg.eta,
            "bound": r.cumulative_bound, "slack": r.slack, "ok": r.satisfied, "guaranteed_gain": r.guaranteed_gain}


def trial_monotone(rng, p):
    eps = p["eps"]
    n = int(rng.integers(1, p["max_items"] + 1))
    items = rng.random(n)
    pi_t, pi_n = _dist(rng, items), _dist(rng, items)
    s = np.clip(pi_t.scores + rng.uniform(-eps, eps, n), 0, 1)
    js0, js1 = float(pi_t.probs @ s), float(pi_n.probs @ s)
    alpha = max(0.0, js0 - js1) + float(rng.random() * p["max_alpha"])
    r = monotonicity_check(pi_t, pi_n, s, s, eps, alpha)
    return {"n": n, "before": r.j_true_before, "after": r.j_true_after, "alpha": alpha, "eps": eps,
            "bound": r.bound, "slack": r.slack, "ok": r.satisfied and r.premise_ok}


def trial_drift(rng, p):
    g = drift_growth(tuple(p["T"]), p["eps"], p["rho"], int(rng.integers(2**31)), p["jitter"])
    gap = g["fixed_slope"] - g["refit_slope"]
    return {"refit_final": g["refit"][-1], "fixed_final": g["fixed"][-1], "refit_slope": g["refit_slope"],
            "fixed_slope": g["fixed_slope"], "slope_gap": gap,
            "ok": g["refit_ok"] and g["fixed_ok"] and gap >= 0.5}


def trial_pareto(rng, p):
    R = rng.random((int(p["n"]), int(p["M"])))
    r = pareto_consistency_check(R, p["delta"], p["kappa"], int(rng.integers(2**31)), p["L"], p["eta"])
    return {"front": len(r.scorer_front), "approx_front": len(r.approx_front), "contained": r.contained,
            "coverage_contained": r.coverage_contained, "ok": r.contained and bool(r.coverage_contained)}


def margin_pool(rng, max_items: int, eps: float, extra: float):
    """True composed scores split into highs and lows separated by more than ``2 eps``."""
    gamma = 2 * eps + extra * (0.01 + rng.random())
    r_low = float(rng.uniform(0, 1 - gamma))
    r_high = r_low + gamma
    n_hi = int(rng.integers(1, max_items // 2 + 1))
    n_lo = int(rng.integers(1, max_items // 2 + 1))
    hi = rng.uniform(r_high, 1.0, n_hi)
    lo = rng.uniform(0.0, r_low, n_lo)
    values = np.concatenate([hi, lo])
    perm = rng.permutation(len(values))
    return values[perm], perm < n_hi


def trial_margin(rng, p):
    values, is_high = margin_pool(rng, int(p["max_items"]), p["eps"], p["extra_margin"])
    pool = [PoolEntry("margin", i, None, SubScores(nc=float(v))) for i, v in enumerate(values)]
    scorer = NoisyScorer(p["eps"], seed=int(rng.integers(2**31)), level="composed")
    res = rank(pool, scorer, weights=PDMS_V1)
    pos = np.empty(len(values), dtype=int)
    pos[list(res.order)] = np.arange(len(values))
    violations = int(sum(1 for h in np.flatnonzero(is_high) for l in np.flatnonzero(~is_high) if pos[h] > pos[l]))
    max_err = float(np.max(np.abs(np.array(res.scores) - values)))
    return {"n": len(values), "violations": violations, "max_err": max_err,
            "ok": violations == 0 and max_err <= p["eps"] + 1e-12}


def synthetic_pool(rng, n: int, full_rate: float, noise_scale: float):
    """True scores with a point mass at 1 and a predicted score with Laplace error."""
    r = rng.beta(4, 1.5, n)
    r[rng.random(n) < full_rate] = 1.0
    s = np.clip(r + rng.laplace(0, noise_scale, n), 0, 1)
    return r, s


TRIALS: Mapping[str, Callable] = {
    "enrichment": trial_enrichment, "expected": trial_expected, "multiround": trial_multiround,
    "monotone": trial_monotone, "drift": trial_drift, "pareto": trial_pareto, "margin": trial_margin,
}


def merged_params(check: str, params: Optional[Mapping] = None) -> dict:
    if check not in CHECKS:
        raise ValueError(f"unknown check {check!r}; choose from {CHECKS}")
    base = dict(DEFAULTS[check])
    extra = dict(params or {})
    unknown = set(extra) - set(base)
    if unknown:
        raise ValueError(f"unknown parameters for {check}: {sorted(unknown)}")
    base.update(extra)
    return base


def run_trial(check: str, seed: int, trial: int, params: Mapping) -> dict:
    rng = np.random.default_rng([int(seed), int(trial)])
    row = TRIALS[check](rng, params)
    return {"trial": trial, **row}


def run_check(check: str, trials: int, seed: int = 0, params: Optional[Mapping] = None) -> tuple[dict, list]:
    """Run ``trials`` seeded trials; returns ``(summary, rows)``."""
    p = merged_params(check, params)
    if check == "report":
        pools = [synthetic_pool(np.random.default_rng([seed, t]), int(p["proposals"]), p["full_rate"],
                                p["noise_scale"]) for t in range(trials)]
        rep = enrichment_report(pools)
        return {"check": check, "trials": trials, "seed": seed, "params": p, "violations": 0, "report": rep}, []
    rows = [run_trial(check, seed, t, p) for t in range(trials)]
    violations = sum(1 for r in rows if not r["ok"])
    summary = {"check": check, "trials": trials, "seed": seed, "params": p, "violations": violations}
    slacks = [r["slack"] for r in rows if "slack" in r]
    if slacks:
        summary["min_slack"] = float(min(slacks))
    return summary, rows

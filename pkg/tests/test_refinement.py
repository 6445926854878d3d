import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmlab.refinement import (
    DiscreteProposalDistribution as D, EnrichmentStepConfig, InvalidDistribution, drift_experiment, drift_growth,
    enrichment_report, enrichment_step, expected_score_step, high_score_mass, mixture, monotonicity_check,
    monotonicity_worst_case, multi_round, oracle_at_k, oracle_lower_bound, pairwise_accuracy, pareto_boundary_case,
    pareto_consistency_check, perturb_tv, top_fraction_selector, tv_distance,
)
from pdmlab.simulation import synthetic_pool


def test_distribution_validation():
    with pytest.raises(InvalidDistribution):
        D(np.array([0.5]), np.array([0.7]))
    with pytest.raises(InvalidDistribution):
        D(np.array([1.5]), np.array([1.0]))
    with pytest.raises(InvalidDistribution):
        D(np.array([0.1, 0.2]), np.array([0.5, 0.5]), np.array([3, 3]))
    with pytest.raises(InvalidDistribution):
        D(np.array([]), np.array([]))


@pytest.mark.parametrize("scores, r_high, expected", [
    ([0.1, 0.5, 0.9], 0.95, 0.0),
    ([0.2, 0.96, 1.0], 0.95, 2 / 3),
    ([0.0, 0.3, 1.0], 0.0, 1.0),
])
def test_high_score_mass(scores, r_high, expected):
    assert high_score_mass(D.uniform(scores), r_high) == pytest.approx(expected)


def test_mixture_merges_shared_keys():
    mu = D(np.array([0.1, 0.9]), np.array([0.5, 0.5]), np.array([1, 2]))
    nu = D(np.array([0.9, 1.0]), np.array([0.5, 0.5]), np.array([2, 3]))
    mix = mixture(mu, nu, 0.5)
    assert dict(zip(mix.keys.tolist(), mix.probs.tolist())) == pytest.approx({1: 0.25, 2: 0.5, 3: 0.25})
    assert tv_distance(mu, nu) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.5), st.sampled_from(["adversarial", "random"]))
def test_perturbation_stays_within_tv(seed, eta, mode):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    d = D(rng.random(n), rng.dirichlet(np.ones(n)))
    out = perturb_tv(d, eta, mode, rng)
    assert tv_distance(d, out) <= eta + 1e-12
    assert out.probs.sum() == pytest.approx(1.0)


def _step(p, q, alpha, eta=0.0, r_high=0.95):
    """Two-atom pools with high-score masses p and q over shared items."""
    mu = D(np.array([0.5, 1.0]), np.array([1 - p, p]))
    nu = D(np.array([0.5, 1.0]), np.array([1 - q, q]))
    return enrichment_step(mu, nu, EnrichmentStepConfig(alpha, eta, r_high))


def test_enrichment_example():
    _, rep = _step(0.2, 0.6, 0.5)
    assert rep.xi == pytest.approx(0.4) and rep.p_after == pytest.approx(0.4) and rep.lower_bound == pytest.approx(0.4)
    assert rep.satisfied


def test_alpha_zero_keeps_mu():
    new, rep = _step(0.3, 0.9, 0.0)
    assert rep.p_after == pytest.approx(0.3) and rep.satisfied


def test_reported_enrichment_gap():
    _, rep = _step(0.3542, 0.6974, 1.0)
    assert rep.xi == pytest.approx(0.3432, abs=1e-12)


def test_adversarial_perturbation_meets_bound_exactly():
    _, rep = _step(0.2, 0.6, 0.5, eta=0.1)
    assert rep.p_after == pytest.approx(0.3) and rep.slack == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_mixture_bound_holds(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    s = np.where(rng.random(n) < 0.4, 1.0, rng.random(n))
    mu, nu = D(s, rng.dirichlet(np.ones(n))), D(s, rng.dirichlet(np.ones(n)))
    cfg = EnrichmentStepConfig(float(rng.random()), float(rng.random() * 0.3), 0.95, seed, "adversarial")
    for step in (enrichment_step, expected_score_step):
        _, rep = step(mu, nu, cfg)
        assert rep.slack >= -1e-12


def test_expected_step_examples():
    mu = D.uniform([0.5])
    _, same = expected_score_step(mu, mu, EnrichmentStepConfig(0.5))
    assert same.xi == 0 and same.p_after == pytest.approx(0.5)
    a = D(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    b = D(np.array([0.0, 1.0]), np.array([0.2, 0.8]))
    _, rep = expected_score_step(a, b, EnrichmentStepConfig(0.5))
    assert rep.p_after == pytest.approx(0.65) and rep.lower_bound == pytest.approx(0.65)
    _, tight = expected_score_step(a, b, EnrichmentStepConfig(0.5, eta=0.5 * 0.3))
    assert tight.lower_bound == pytest.approx(0.5) and tight.p_after >= 0.5 - 1e-12


def test_multi_round_constant_gain():
    scores = np.linspace(0, 1, 101)
    mu0 = D.uniform(scores)
    rep = multi_round(mu0, top_fraction_selector(0.25), EnrichmentStepConfig(0.5, 0.01), 10)
    assert rep.satisfied and rep.guaranteed_gain
    gains = [r.alpha * r.xi - r.eta for r in rep.rounds]
    assert rep.cumulative_bound == pytest.approx(mu0.mean() + sum(gains))
    flat = multi_round(mu0, lambda mu, rng: mu, EnrichmentStepConfig(0.5, 0.0), 10)
    assert flat.e_final == pytest.approx(mu0.mean())


def _shift_selector(beta):
    """Fresh items scoring exactly ``beta`` above each current item."""
    def select(mu, rng):
        keys = mu.keys.max() + 1 + np.arange(len(mu.keys))
        return D(mu.scores + beta, mu.probs, keys)
    return select


def test_multi_round_telescoped_gain():
    # beta = 0.1, alpha = 0.5, eta = 0.01 over 10 rounds: 10 * (0.05 - 0.01) = 0.4
    mu0 = D(np.array([0.0]), np.array([1.0]))
    rep = multi_round(mu0, _shift_selector(0.1), EnrichmentStepConfig(0.5, 0.01), 10)
    assert all(r.xi == pytest.approx(0.1) for r in rep.rounds)
    assert rep.cumulative_bound - rep.e_initial == pytest.approx(0.4)
    assert rep.e_final - rep.e_initial >= 0.4 - 1e-12 and rep.guaranteed_gain


def test_multi_round_flags_vacuous_bound():
    mu0 = D.uniform(np.linspace(0, 1, 11))
    rep = multi_round(mu0, top_fraction_selector(0.9), EnrichmentStepConfig(0.01, 0.2), 5)
    assert not rep.guaranteed_gain and rep.satisfied


@pytest.mark.parametrize("p, K, expected", [(0.5, 1, 0.5), (1.0, 7, 1.0), (0.3542, 64, 1 - 0.6458 ** 64)])
def test_oracle_at_k(p, K, expected):
    assert oracle_at_k(p, K) == pytest.approx(expected, abs=1e-15)


def test_oracle_lower_bound_and_validation():
    assert oracle_lower_bound(0.5, 1, 0.2, 1.0) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        oracle_at_k(1.5, 2)


def test_monotonicity_exact_scorer():
    a, b = D.uniform([0.2, 0.6]), D(np.array([0.2, 0.6]), np.array([0.2, 0.8]))
    rep = monotonicity_check(a, b, a.scores, b.scores, 0.0, 0.0)
    assert rep.premise_ok and rep.satisfied and rep.change >= 0


def test_monotonicity_worst_case():
    rep = monotonicity_worst_case(0.05)
    assert rep.premise_ok and rep.change == pytest.approx(-0.1, abs=1e-9)
    assert rep.slack == pytest.approx(0.0, abs=1e-9)


def test_drift_without_motion():
    rep = drift_experiment(10, 0.02, 0.0)
    expected = [0.02 * t for t in range(1, 11)]
    assert rep.refit == pytest.approx(expected) and rep.fixed == pytest.approx(expected)


def test_drift_bound_example():
    rep = drift_experiment(20, 0.0, 0.1)
    assert rep.refit[-1] <= 2.0 + 1e-12 and rep.fixed_bound[-1] == pytest.approx(21.0)
    assert rep.refit_ok and rep.fixed_ok
    assert all(tv == pytest.approx(0.1) for tv in rep.tv_steps)


def test_drift_growth_gap():
    g = drift_growth(seed=3, jitter=0.5)
    assert g["refit_slope"] == pytest.approx(1.0, abs=0.1)
    assert g["fixed_slope"] - g["refit_slope"] >= 0.5


def test_pareto_consistency_zero_error():
    R = np.random.default_rng(1).random((30, 3))
    rep = pareto_consistency_check(R, 0.0, 1e-9)
    assert rep.contained


def test_pareto_consistency_rejects_large_errors():
    R = np.zeros((2, 2))
    with pytest.raises(ValueError):
        pareto_consistency_check(R, 0.01, 1e-6, predicted=R + 0.5)


def test_pareto_boundary_case():
    out = pareto_boundary_case(0.25)
    assert out["scorer_front"] == [0, 1] and not out["in_2delta"] and out["in_2delta_kappa"]


def test_oracle_report_is_perfect():
    rng = np.random.default_rng(0)
    pools = [(r, r.copy()) for r in (synthetic_pool(rng, 64, 0.35, 0.0)[0] for _ in range(20))]
    rep = enrichment_report(pools)
    assert rep["pairwise_accuracy"] == pytest.approx(1.0)


def test_noise_erases_enrichment():
    rng = np.random.default_rng(5)
    r = rng.random(10_000)
    s = rng.random(10_000)
    acc, pairs = pairwise_accuracy(r, s)
    assert pairs > 0 and acc == pytest.approx(0.5, abs=0.05)

import numpy as np
import pytest

from pdmlab.simulation import CHECKS, DEFAULTS, margin_pool, merged_params, run_check, run_trial, synthetic_pool


def test_merged_params_validation():
    assert merged_params("margin", {"eps": 0.1})["eps"] == 0.1
    with pytest.raises(ValueError):
        merged_params("nope")
    with pytest.raises(ValueError):
        merged_params("margin", {"bogus": 1})


@pytest.mark.parametrize("check", [c for c in CHECKS if c != "report"])
def test_trials_are_deterministic(check):
    p = merged_params(check)
    assert run_trial(check, 4, 2, p) == run_trial(check, 4, 2, p)


@pytest.mark.parametrize("check, trials", [
    ("enrichment", 200), ("expected", 200), ("multiround", 30), ("monotone", 200), ("drift", 2),
    ("pareto", 20), ("margin", 100), ("report", 20),
])
def test_checks_have_no_violations(check, trials):
    summary, rows = run_check(check, trials, seed=9)
    assert summary["violations"] == 0
    assert summary["params"] == DEFAULTS[check]
    assert len(rows) == (0 if check == "report" else trials)


def test_synthetic_pool_shapes():
    r, s = synthetic_pool(np.random.default_rng(0), 64, 0.35, 0.04)
    assert len(r) == len(s) == 64
    assert np.all((0 <= np.asarray(r)) & (np.asarray(r) <= 1))


def test_margin_pool_is_seeded():
    a = margin_pool(np.random.default_rng(1), 20, 0.05, 0.05)
    b = margin_pool(np.random.default_rng(1), 20, 0.05, 0.05)
    assert repr(a) == repr(b)

import math

import numpy as np
import pytest

from charter.baseline import calibrate_round_budget, run_dpsgd
from charter.mechanisms import PrivacyParams, advanced_composition, amplify_by_subsampling
from charter.orchestrator import excess_risk, run_charter
from charter.problems import make_problem
from charter.vaidya import VaidyaConfig


def test_cc_bits_accounting():
    p = make_problem("max-abs", 3, 2, seed=0)
    res = run_dpsgd(p, 2, 5000, rounds=37)
    assert res.cc_bits == 37 * 3 * 32


def test_zero_step_keeps_initial_point():
    p = make_problem("max-abs", 3, 2, seed=0)
    res = run_dpsgd(p, 2, 5000, rounds=20, step_size=0.0)
    assert res.excess_risk == excess_risk(p, p.center)


def test_calibrated_budget_fits():
    eps_r, delta_r = calibrate_round_budget(0.5, 1e-5, 100, 50, 5000)
    e1, d1 = amplify_by_subsampling(eps_r, delta_r, 50, 5000)
    eps, delta = advanced_composition(e1, d1, 100, 0.5e-5)
    assert eps <= 0.5 and delta <= 1e-5
    assert eps == pytest.approx(0.5, rel=1e-6) or eps_r == pytest.approx(1.0, abs=1e-9)


def test_private_baseline_records_ledger():
    p = make_problem("max-abs", 2, 2, seed=0)
    res = run_dpsgd(p, 2, 5000, eps_dp=0.5, rounds=50)
    assert res.noise_std > 0
    assert res.ledger.composed[0] <= 0.5


def test_comparable_to_charter_on_quadratic():
    cfg = VaidyaConfig(gamma=0.1, eta=0.9)
    ours, theirs = [], []
    for s in range(5):
        p = make_problem("hetero-quadratic", 2, 2, seed=s)
        ours.append(run_charter(p, 2, 20000, PrivacyParams(math.inf), cfg, seed=s, K=60,
                                override_n_floor=True).excess_risk)
        theirs.append(run_dpsgd(p, 2, 20000, rounds=200, seed=s).excess_risk)
    assert np.median(theirs) <= 2 * np.median(ours)

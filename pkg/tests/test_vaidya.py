import math

import numpy as np
import pytest

from charter.exceptions import DegenerateDirection, InvalidInput
from charter.polytope import Polyhedron, barrier_state, leverage_scores, volumetric_center
from charter.problems import make_problem
from charter.vaidya import VaidyaConfig, decide_step, run_cutting_plane


def test_config_validation():
    with pytest.raises(InvalidInput):
        VaidyaConfig(gamma=1.5)
    with pytest.raises(InvalidInput):
        VaidyaConfig(eta=0.0)
    with pytest.raises(InvalidInput):
        VaidyaConfig(K=0)


def test_cut_depth_sets_new_leverage():
    P = Polyhedron.box(np.zeros(3), 2.0)
    cfg = VaidyaConfig(gamma=0.1, eta=0.9)
    st = volumetric_center(P, np.zeros(3))
    c = np.array([1.0, 2.0, -0.5])
    step = decide_step(st, cfg, c)
    assert step.kind == "add"
    # c^T H^-1 c / (c^T x - beta)^2 equals the target
    gap = c @ st.x - step.offset
    assert st.hinv_quad(c) / gap**2 == pytest.approx(cfg.depth_target, rel=1e-12)
    q = cfg.depth_target
    sig = leverage_scores(P.add_row(c, step.offset), st.x)
    assert sig[-1] == pytest.approx(q / (1 + q), rel=1e-10)


def test_drop_picks_lowest_index_minimum():
    # square with a duplicated far-away constraint: both copies share the minimum
    A = np.vstack([np.eye(2), -np.eye(2), [[1.0, 0.0], [1.0, 0.0]]])
    b = np.array([-1.0, -1.0, -1.0, -1.0, -50.0, -50.0])
    P = Polyhedron(A, b)
    st = barrier_state(P, np.zeros(2))
    step = decide_step(st, VaidyaConfig(gamma=0.05), np.ones(2))
    assert step.kind == "drop" and step.row == 4


def test_zero_direction_raises():
    P = Polyhedron.box(np.zeros(2), 2.0)
    st = barrier_state(P, np.zeros(2))
    with pytest.raises(DegenerateDirection):
        decide_step(st, VaidyaConfig(gamma=0.05), np.zeros(2))


def test_one_provider_call_per_iteration_and_noops():
    calls = []

    def provider(x, k):
        calls.append(k)
        return None if k % 3 == 0 else np.array([1.0, 0.5])

    cfg = VaidyaConfig(gamma=0.1, eta=0.9, K=12)
    res = run_cutting_plane(Polyhedron.box(np.zeros(2), 2.0), cfg, provider)
    assert calls == list(range(12))
    assert res.iterates.shape == (13, 2)
    kinds = [s.kind for s in res.steps]
    assert kinds[0] == "noop"
    assert np.array_equal(res.iterates[0], res.iterates[1])


def test_drop_below_minimum_rows_is_noop():
    tri = Polyhedron([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [0.0, 0.0, -1.0])
    cfg = VaidyaConfig(gamma=0.9, eta=0.9, K=3)
    res = run_cutting_plane(tri, cfg, lambda x, k: np.array([1.0, 0.0]))
    assert [s.kind for s in res.steps] == ["noop"] * 3
    assert res.final.n_rows == 3


def test_max_rows_caps_constraints():
    cfg = VaidyaConfig(gamma=0.05, eta=0.9, K=60, max_rows=7)
    p = make_problem("max-abs", 2, 1, seed=0)
    res = run_cutting_plane(p.domain(), cfg, lambda x, k: p.true_grad(x), keep_polytopes=True)
    assert max(P.n_rows for P in res.polytopes) <= 7


def test_iterates_stay_interior_and_deterministic():
    p = make_problem("max-abs", 3, 1, seed=4)
    cfg = VaidyaConfig(gamma=0.1, eta=0.9, K=80)
    a = run_cutting_plane(p.domain(), cfg, lambda x, k: p.true_grad(x), keep_polytopes=True)
    b = run_cutting_plane(p.domain(), cfg, lambda x, k: p.true_grad(x))
    assert np.array_equal(a.iterates, b.iterates)
    for P, x in zip(a.polytopes, a.iterates):
        assert np.all(P.slacks(x) > 0)


def test_cuts_keep_the_minimizer():
    # exact subgradient cuts never remove the minimizer
    p = make_problem("max-abs", 2, 1, seed=1)
    cfg = VaidyaConfig(gamma=0.1, eta=0.9, K=150)
    res = run_cutting_plane(p.domain(), cfg, lambda x, k: p.true_grad(x), keep_polytopes=True)
    for P in res.polytopes:
        assert np.all(P.slacks(p.minimizer) > -1e-12)


def test_small_eta_cycles_between_add_and_drop():
    # the new cut's leverage q/(1+q) is below gamma, so it is dropped right away
    cfg = VaidyaConfig(gamma=0.2, eta=0.5, K=20)
    q = cfg.depth_target
    assert q / (1 + q) < cfg.gamma
    p = make_problem("max-abs", 2, 1, seed=0)
    res = run_cutting_plane(p.domain(), cfg, lambda x, k: p.true_grad(x))
    kinds = [s.kind for s in res.steps]
    assert kinds[2:] == ["add", "drop"] * 9


def test_converges_on_max_abs():
    p = make_problem("max-abs", 2, 1, seed=2)
    cfg = VaidyaConfig(gamma=0.1, eta=0.9, K=400)
    res = run_cutting_plane(p.domain(), cfg, lambda x, k: p.true_grad(x))
    assert np.min(p.true_loss(res.iterates)) < 1e-3

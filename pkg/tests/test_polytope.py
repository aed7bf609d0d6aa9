import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull, HalfspaceIntersection

from charter.exceptions import InvalidInput, NotInterior, SingularH
from charter.polytope import (Polyhedron, barrier_gradient, barrier_state, barrier_value, leverage_scores,
                              volumetric_center)

from _geometry import polyhedron_area


def random_polyhedron(rng, d, extra=6, side=2.0):
    box = Polyhedron.box(np.zeros(d), side)
    rows = rng.standard_normal((extra, d))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    # offsets keep the origin strictly inside
    b = -rng.uniform(0.2, 1.0, size=extra)
    return Polyhedron(np.vstack([box.A, rows]), np.concatenate([box.b, b]))


def brute_volumetric(P, x):
    s = P.A @ x - P.b
    H = sum(np.outer(a, a) / si**2 for a, si in zip(P.A, s))
    return 0.5 * math.log(np.linalg.det(H))


def test_rows_are_normalized():
    P = Polyhedron([[2.0, 0.0], [0.0, 3.0], [-1.0, -1.0]], [-2.0, -3.0, -1.0])
    assert np.allclose(np.linalg.norm(P.A, axis=1), 1.0)
    assert np.allclose(P.b, [-1.0, -1.0, -1.0 / math.sqrt(2)])


def test_too_few_rows_rejected():
    with pytest.raises(InvalidInput):
        Polyhedron(np.eye(2), [0.0, 0.0])


def test_zero_row_rejected():
    with pytest.raises(InvalidInput):
        Polyhedron([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0.0, -1.0, -1.0])


def test_not_interior():
    P = Polyhedron.box(np.zeros(2), 2.0)
    with pytest.raises(NotInterior):
        barrier_value(P, np.array([1.0, 0.0]))
    with pytest.raises(NotInterior):
        barrier_value(P, np.array([3.0, 0.0]))


def test_singular_h():
    # three parallel-ish constraints in R^2 give a rank-one H
    P = Polyhedron([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]], [-1.0, -1.0, -2.0])
    with pytest.raises(SingularH):
        barrier_state(P, np.zeros(2))


def test_barrier_matches_determinant_formula():
    rng = np.random.default_rng(3)
    for d in range(2, 6):
        P = random_polyhedron(rng, d)
        x = rng.uniform(-0.05, 0.05, size=d)
        assert barrier_value(P, x) == pytest.approx(brute_volumetric(P, x), abs=1e-10)


def test_cube_value_small_cases():
    # [-1,1]^1: H = 1 + 1 = 2 -> V = log(2)/2
    P = Polyhedron.box(np.zeros(1), 2.0)
    assert barrier_value(P, np.zeros(1)) == pytest.approx(0.5 * math.log(2.0), abs=1e-14)
    # side 4 cube: H = 2/4 I
    P = Polyhedron.box(np.zeros(3), 4.0)
    assert barrier_value(P, np.zeros(3)) == pytest.approx(1.5 * math.log(0.5), abs=1e-14)


def test_translation_invariance():
    rng = np.random.default_rng(5)
    P = random_polyhedron(rng, 3)
    v = rng.standard_normal(3)
    x = np.array([0.01, -0.02, 0.03])
    assert barrier_value(P.translate(v), x + v) == pytest.approx(barrier_value(P, x), abs=1e-10)
    assert np.allclose(leverage_scores(P.translate(v), x + v), leverage_scores(P, x))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    P = random_polyhedron(rng, 4)
    x = rng.uniform(-0.05, 0.05, size=4)
    g = barrier_gradient(P, x)
    h = 1e-6
    fd = np.array([(barrier_value(P, x + h * e) - barrier_value(P, x - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(g, fd, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 8), seed=st.integers(0, 10_000))
def test_leverages_sum_to_dimension(d, seed):
    P = random_polyhedron(np.random.default_rng(seed), d)
    sig = leverage_scores(P, np.zeros(d))
    assert np.all(sig > 0) and np.all(sig <= 1 + 1e-12)
    assert sig.sum() == pytest.approx(d, abs=1e-8 * d)


def test_cube_center_is_volumetric_center():
    P = Polyhedron.box(np.array([0.3, -0.2, 1.0]), 2.0)
    st_ = volumetric_center(P, np.array([0.5, 0.1, 0.6]))
    assert np.allclose(st_.x, [0.3, -0.2, 1.0], atol=1e-8)


def test_triangle_center_against_grid_search():
    # triangle x >= 0, y >= 0, x + 2y <= 2
    P = Polyhedron([[1.0, 0.0], [0.0, 1.0], [-1.0, -2.0]], [0.0, 0.0, -2.0])
    st_ = volumetric_center(P, np.array([0.3, 0.3]))
    best, best_x = np.inf, None
    for x in np.linspace(0.01, 1.9, 190):
        for y in np.linspace(0.01, 0.95, 95):
            if x + 2 * y < 2:
                v = brute_volumetric(P, np.array([x, y]))
                if v < best:
                    best, best_x = v, np.array([x, y])
    assert np.linalg.norm(st_.x - best_x) < 0.02
    assert st_.V <= best + 1e-9


def test_centering_is_start_independent():
    rng = np.random.default_rng(11)
    P = random_polyhedron(rng, 3)
    a = volumetric_center(P, np.zeros(3)).x
    b = volumetric_center(P, np.array([0.05, 0.05, -0.05])).x
    assert np.allclose(a, b, atol=1e-7)


def test_area_oracle_matches_scipy():
    rng = np.random.default_rng(13)
    for _ in range(10):
        P = random_polyhedron(rng, 2, extra=5)
        hs = np.hstack([-P.A, P.b[:, None]])
        hull = ConvexHull(HalfspaceIntersection(hs, np.zeros(2)).intersections)
        assert polyhedron_area(P.A, P.b) == pytest.approx(hull.volume, rel=1e-9)

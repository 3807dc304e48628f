import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from csrfbs.prox import (BallSpec, project_l1_ball, project_l2_ball, project_unit_l2, prox_conjugate, prox_half_sq,
                         soft_threshold, svt)

from oracles import (l1_ball_oracle, l1_ball_qp_oracle, l2_ball_oracle, nuclear_prox_objective, nuclear_prox_oracle,
                     nuclear_subgradient_residual,
                     prox_half_sq_oracle, soft_threshold_oracle)

vecs = arrays(np.float64, st.integers(1, 30), elements=st.floats(-5, 5, allow_nan=False))
radius = st.floats(0, 20, allow_nan=False)


def test_soft_threshold_examples():
    np.testing.assert_allclose(soft_threshold(np.array([0.3, -0.05]), 0.1), [0.2, 0.0])
    x = np.array([1.5, -2.0, 0.0])
    np.testing.assert_array_equal(soft_threshold(x, 0.0), x)


def test_prox_half_sq_examples():
    assert prox_half_sq(np.array([2.0]), 1.0).tolist() == [1.0]
    np.testing.assert_array_equal(prox_half_sq(np.array([2.0, -3.0]), 0.0), [2.0, -3.0])


def test_l2_ball_examples():
    np.testing.assert_allclose(project_l2_ball(np.array([3.0, 4.0]), np.zeros(2), 1.0), [0.6, 0.8])
    x = np.array([0.1, 0.2])
    np.testing.assert_array_equal(project_l2_ball(x, np.zeros(2), 1.0), x)


def test_l1_ball_examples():
    for method in ("sort", "pivot"):
        np.testing.assert_allclose(project_l1_ball(np.array([1.0, 1.0]), 1.0, method), [0.5, 0.5])
        x = np.array([0.2, -0.3])
        np.testing.assert_array_equal(project_l1_ball(x, 1.0, method), x)
    np.testing.assert_allclose(l1_ball_qp_oracle(np.array([1.0, 1.0]), 1.0), [0.5, 0.5], atol=1e-7)


def test_svt_examples():
    np.testing.assert_allclose(svt(np.diag([3.0, 1.0]), 1.0), np.diag([2.0, 0.0]), atol=1e-12)
    B = np.random.default_rng(1).standard_normal((4, 6))
    np.testing.assert_allclose(svt(B, 0.0), B, atol=1e-10)


def test_unit_l2_examples():
    d = np.array([0.3, 0.4])
    np.testing.assert_array_equal(project_unit_l2(d), d)
    np.testing.assert_allclose(project_unit_l2(np.array([1.2, 1.6])), [0.6, 0.8])


@pytest.mark.parametrize("fn, arg", [(soft_threshold, -0.1), (prox_half_sq, -1.0)])
def test_negative_parameters_rejected(fn, arg):
    with pytest.raises(ValueError):
        fn(np.ones(2), arg)


def test_other_errors():
    with pytest.raises(ValueError):
        project_l2_ball(np.ones(2), np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        project_l1_ball(np.ones(2), -1.0)
    with pytest.raises(ValueError):
        prox_conjugate(soft_threshold, np.ones(2), 0.0)
    with pytest.raises(np.linalg.LinAlgError):
        svt(np.array([[np.inf, 0.0]]), 1.0)


def test_scalar_proxes_match_argmin_oracles(rng):
    for _ in range(50):
        x = rng.standard_normal(6) * 2
        alpha = float(rng.uniform(0, 2))
        np.testing.assert_allclose(soft_threshold(x, alpha), soft_threshold_oracle(x, alpha), atol=1e-6)
        np.testing.assert_allclose(prox_half_sq(x, alpha), prox_half_sq_oracle(x, alpha), atol=1e-12)


def test_projections_match_convex_solver(rng):
    for _ in range(50):
        x = rng.standard_normal(8) * 3
        c = rng.standard_normal(8)
        eps = float(rng.uniform(0, 4))
        eta = float(rng.uniform(0, 6))
        np.testing.assert_allclose(project_l2_ball(x, c, eps), l2_ball_oracle(x, c, eps), atol=1e-6)
        np.testing.assert_allclose(project_l1_ball(x, eta), l1_ball_qp_oracle(x, eta), atol=1e-6)


def test_l1_methods_match_bisection(rng):
    for _ in range(60):
        x = rng.standard_normal(50) * rng.uniform(0.1, 5)
        eta = float(rng.uniform(0, 30))
        want = l1_ball_oracle(x, eta)
        np.testing.assert_allclose(project_l1_ball(x, eta, "sort"), want, atol=1e-10)
        np.testing.assert_allclose(project_l1_ball(x, eta, "pivot"), want, atol=1e-10)


def test_svt_matches_argmin_oracle(rng):
    for _ in range(50):
        B = rng.standard_normal((6, 9))
        gamma = float(rng.uniform(0.05, 3))
        Y = svt(B, gamma)
        Yo = nuclear_prox_oracle(B, gamma)
        np.testing.assert_allclose(Y, Yo, atol=1e-6)
        assert nuclear_prox_objective(Y, B, gamma) <= nuclear_prox_objective(Yo, B, gamma) + 1e-12
        assert nuclear_subgradient_residual(Y, B, gamma) < 1e-9


def test_svt_beats_thresholded_candidates(rng):
    # every reconstruction from B's own singular triplets with other thresholds scores no better
    B = rng.standard_normal((6, 9))
    gamma = 0.8
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    best = nuclear_prox_objective(svt(B, gamma), B, gamma)
    for t in np.linspace(0, 3, 61):
        cand = (U * np.maximum(s - t, 0)) @ Vt
        assert best <= nuclear_prox_objective(cand, B, gamma) + 1e-12


@given(vecs, radius)
def test_l1_projection_feasible_and_idempotent(x, eta):
    for method in ("sort", "pivot"):
        p = project_l1_ball(x, eta, method)
        assert np.abs(p).sum() <= eta * (1 + 1e-12) + 1e-12
        np.testing.assert_allclose(project_l1_ball(p, eta, method), p, atol=1e-12)
        assert np.all(np.sign(p) * np.sign(x) >= 0)


@given(vecs, radius, st.integers(0, 2**32 - 1))
def test_l2_projection_feasible_and_idempotent(x, eps, seed):
    c = np.random.default_rng(seed).standard_normal(x.size)
    p = project_l2_ball(x, c, eps)
    # c + t (x - c) is only exact up to a few ulps of the operands
    floor = 4 * np.finfo(float).eps * max(1.0, np.abs(c).max(), np.abs(x).max())
    assert np.linalg.norm(p - c) <= eps * (1 + 1e-12) + floor
    np.testing.assert_allclose(project_l2_ball(p, c, eps), p, atol=1e-12)
    ball = BallSpec("l2", eps, c)
    assert ball.contains(ball.project(x), rtol=1e-12 + floor / max(eps, 1e-300))


@given(vecs)
def test_unit_l2_projection(d):
    p = project_unit_l2(d)
    assert np.linalg.norm(p) <= 1 + 1e-12
    np.testing.assert_allclose(project_unit_l2(p), p)


@given(vecs, st.floats(0.01, 10))
def test_moreau_decomposition(y, gamma):
    lam = 0.7
    prox_l1 = lambda x, a: soft_threshold(x, a * lam)
    p = prox_conjugate(prox_l1, y, gamma)
    np.testing.assert_allclose(p, np.clip(y, -lam, lam), atol=1e-12)
    np.testing.assert_allclose(p + gamma * prox_l1(y / gamma, 1 / gamma), y, atol=1e-12)
    np.testing.assert_allclose(prox_conjugate(prox_half_sq, y, gamma), y / (1 + gamma), atol=1e-12)


def test_ball_spec_validation():
    with pytest.raises(ValueError):
        BallSpec("l3", 1.0)
    with pytest.raises(ValueError):
        BallSpec("l2", 1.0)
    with pytest.raises(ValueError):
        BallSpec("l1", -1.0)
    assert BallSpec("l1", 1.0).contains(np.array([0.5, -0.5]))

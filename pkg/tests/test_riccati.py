import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lqgtune.dynamics import QuadrotorParams, hover_equilibrium, linearize
from lqgtune.riccati import (
    N_PARAMS,
    LqgGains,
    LqgWeights,
    RiccatiError,
    closed_loop_matrix,
    diag_to_param,
    is_hurwitz,
    params_from_weights,
    solve_care,
    solve_kalman,
    solve_lyapunov,
    synthesize,
    weights_from_params,
)

from .helpers import default_noise


def residual(A, B, Q, R, P):
    # written out independently of the library's own residual helper
    return np.linalg.norm(A.T @ P + P @ A - P @ B @ np.linalg.inv(R) @ B.T @ P + Q)


def test_scalar_case():
    P, K = solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert K[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert residual(np.zeros((1, 1)), np.ones((1, 1)), np.eye(1), np.eye(1), P) <= 1e-9


def test_double_integrator():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    P, K = solve_care(A, B, np.eye(2), np.eye(1))
    np.testing.assert_allclose(K, [[1.0, math.sqrt(3)]], atol=1e-12)
    # analytic P = [[sqrt3, 1], [1, sqrt3]]
    np.testing.assert_allclose(P, [[math.sqrt(3), 1], [1, math.sqrt(3)]], atol=1e-12)
    assert residual(A, B, np.eye(2), np.eye(1), P) <= 1e-12


def random_stabilizable(rng, n, m):
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    return A, B


def test_random_systems():
    rng = np.random.default_rng(7)
    for k in range(50):
        n = 2 + k % 11
        m = 1 + k % 4
        A, B = random_stabilizable(rng, n, m)
        P, K = solve_care(A, B, np.eye(n), np.eye(m))
        assert residual(A, B, np.eye(n), np.eye(m), P) <= 1e-9 * (1 + np.linalg.norm(P))
        assert np.max(np.linalg.eigvals(A - B @ K).real) < 0
        np.testing.assert_allclose(P, P.T, atol=1e-12 * (1 + np.abs(P).max()))
        assert np.linalg.eigvalsh(P).min() > -1e-9


def test_weight_scaling_leaves_gain_unchanged():
    rng = np.random.default_rng(8)
    A, B = random_stabilizable(rng, 6, 2)
    Q, R = np.diag(rng.uniform(0.5, 2, 6)), np.diag(rng.uniform(0.5, 2, 2))
    P1, K1 = solve_care(A, B, Q, R)
    P2, K2 = solve_care(A, B, 7.5 * Q, 7.5 * R)
    np.testing.assert_allclose(K1, K2, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(7.5 * P1, P2, rtol=1e-8, atol=1e-10)


def test_unstabilizable_system_raises():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(RiccatiError):
        solve_care(A, B, np.eye(2), np.eye(1))


def test_dimension_errors():
    with pytest.raises(ValueError):
        solve_care(np.eye(3), np.ones((2, 1)), np.eye(3), np.eye(1))
    with pytest.raises(RiccatiError):
        solve_care(np.eye(1) * np.nan, np.eye(1), np.eye(1), np.eye(1))


def test_kalman_scalar_and_duality():
    P, L = solve_kalman([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert L[0, 0] == pytest.approx(1.0, abs=1e-9)
    p = QuadrotorParams()
    m = linearize(p, hover_equilibrium(p))
    W, V = default_noise()
    P, L = solve_kalman(m.A, m.C, W, V)
    Pd, Kd = solve_care(m.A.T, m.C.T, W, V + 1e-12 * np.eye(6))
    np.testing.assert_allclose(P, Pd, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(L, Kd.T, rtol=1e-12, atol=1e-15)
    assert np.max(np.linalg.eigvals(m.A - L @ m.C).real) < 0


def test_lyapunov_examples():
    np.testing.assert_allclose(solve_lyapunov([[-1.0]], [[2.0]]), [[1.0]], atol=1e-14)
    np.testing.assert_allclose(solve_lyapunov(-np.eye(3), np.eye(3)), np.eye(3) / 2, atol=1e-14)
    with pytest.raises(RiccatiError):
        solve_lyapunov(np.eye(2), np.eye(2))


def test_lyapunov_against_kronecker_oracle():
    rng = np.random.default_rng(9)
    for n in (2, 5, 12):
        M = rng.normal(size=(n, n))
        A = M - (np.max(np.linalg.eigvals(M).real) + 0.5) * np.eye(n)
        G = rng.normal(size=(n, n))
        W = G @ G.T
        P = solve_lyapunov(A, W)
        # vec(AP + PA') = (I (x) A + A (x) I) vec(P), column-major vec
        K = np.kron(np.eye(n), A) + np.kron(A, np.eye(n))
        P_oracle = np.linalg.solve(K, -W.flatten(order="F")).reshape((n, n), order="F")
        np.testing.assert_allclose(P, P_oracle, rtol=1e-9, atol=1e-12)
        assert np.linalg.norm(A @ P + P @ A.T + W) <= 1e-10 * (1 + np.linalg.norm(P))


def _hover_gains():
    p = QuadrotorParams()
    m = linearize(p, hover_equilibrium(p))
    W, V = default_noise()
    w = LqgWeights.from_matrices(np.eye(12), np.eye(4), W, V)
    return m, synthesize(m, w)


def _multiset_close(a, b, tol):
    a = list(a)
    for z in b:
        i = int(np.argmin([abs(z - y) for y in a]))
        if abs(a[i] - z) > tol:
            return False
        a.pop(i)
    return not a


def test_separation_principle():
    m, g = _hover_gains()
    Acl = closed_loop_matrix(m, g)
    assert Acl.shape == (24, 24)
    full = np.linalg.eigvals(Acl)
    parts = np.concatenate([np.linalg.eigvals(m.A - m.B @ g.K), np.linalg.eigvals(m.A - g.L @ m.C)])
    assert _multiset_close(full, parts, 1e-8)
    assert is_hurwitz(Acl)


def test_closed_loop_with_zero_gains():
    m, _ = _hover_gains()
    g = LqgGains(K=np.zeros((4, 12)), L=np.zeros((12, 6)), P_ctrl=None, P_est=None)
    np.testing.assert_array_equal(closed_loop_matrix(m, g),
                                  np.block([[m.A, np.zeros((12, 12))], [np.zeros((12, 12)), m.A]]))


def test_identity_parameters():
    theta = np.zeros(N_PARAMS)
    rows, cols = np.tril_indices(12)
    theta[:78][rows == cols] = diag_to_param(1.0)
    rows, cols = np.tril_indices(4)
    theta[78:][rows == cols] = diag_to_param(1.0)
    w = weights_from_params(theta)
    np.testing.assert_allclose(w.Q, np.eye(12), atol=1e-14)
    np.testing.assert_allclose(w.R, np.eye(4), atol=1e-14)


def test_parameter_length_checked():
    with pytest.raises(ValueError):
        weights_from_params(np.zeros(87))


def test_parameter_roundtrip():
    rng = np.random.default_rng(10)
    for _ in range(100):
        theta = rng.normal(0, 3, N_PARAMS)
        back = params_from_weights(weights_from_params(theta))
        np.testing.assert_allclose(back, theta, atol=1e-12, rtol=0)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, N_PARAMS, elements=st.floats(-50, 50)))
def test_any_parameters_give_valid_weights(theta):
    w = weights_from_params(theta)
    Q, R = w.Q, w.R
    np.testing.assert_array_equal(Q, Q.T)
    np.testing.assert_array_equal(R, R.T)
    # Gram matrices: quadratic forms are non-negative for any direction
    z = np.linspace(-1, 1, 12)
    assert z @ Q @ z >= -1e-9 * max(1.0, np.abs(Q).max())
    assert np.all(np.diag(w.L_R) >= 1e-8)
    assert np.all(np.isfinite(Q)) and np.all(np.isfinite(R))


def test_from_matrices_roundtrip():
    rng = np.random.default_rng(11)
    G = rng.normal(size=(12, 12))
    Q = G @ G.T + np.eye(12)
    R = np.diag([1.0, 2.0, 3.0, 4.0])
    w = LqgWeights.from_matrices(Q, R)
    np.testing.assert_allclose(w.Q, Q, rtol=1e-12)
    w2 = weights_from_params(params_from_weights(w))
    np.testing.assert_allclose(w2.Q, Q, rtol=1e-10)
    np.testing.assert_allclose(w2.R, R, rtol=1e-12)


def test_synthesize_requires_noise():
    p = QuadrotorParams()
    m = linearize(p, hover_equilibrium(p))
    with pytest.raises(ValueError):
        synthesize(m, LqgWeights.from_matrices(np.eye(12), np.eye(4)))

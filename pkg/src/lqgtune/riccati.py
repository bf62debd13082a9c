"""Riccati and Lyapunov solvers, Cholesky weight parameterization, LQG synthesis."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dynamics import LinearModel

N_STATES = 12
N_INPUTS = 4
N_PARAMS = N_STATES * (N_STATES + 1) // 2 + N_INPUTS * (N_INPUTS + 1) // 2  # 88

DIAG_FLOOR = 1e-8
IMAG_AXIS_TOL = 1e-9
NEWTON_MAX_ITER = 100
V_REGULARIZATION = 1e-12


class RiccatiError(np.linalg.LinAlgError):
    """Raised when a Riccati/Lyapunov equation has no usable stabilizing solution."""


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def care_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of A'P + PA - PBR^-1B'P + Q."""
    G = B @ np.linalg.solve(R, B.T)
    return float(np.linalg.norm(A.T @ P + P @ A - P @ G @ P + Q))


def is_hurwitz(M: np.ndarray) -> bool:
    return bool(np.max(np.linalg.eigvals(M).real) < 0)


def solve_lyapunov(A, W) -> np.ndarray:
    """Solve A P + P A' + W = 0 for Hurwitz A."""
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    if not is_hurwitz(A):
        raise RiccatiError("Lyapunov solve requires a Hurwitz matrix")
    with warnings.catch_warnings():
        # near-marginal spectra: scipy perturbs and warns; callers check residuals
        warnings.simplefilter("ignore", RuntimeWarning)
        P = _sym(sla.solve_continuous_lyapunov(A, -W))
    return P


def _schur_care(A, G, Q) -> np.ndarray:
    n = A.shape[0]
    H = np.block([[A, -G], [-Q, -A.T]])
    ev = np.linalg.eigvals(H)
    if np.min(np.abs(ev.real)) < IMAG_AXIS_TOL:
        raise RiccatiError("Hamiltonian has eigenvalues on the imaginary axis")
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise RiccatiError(f"stable invariant subspace has dimension {sdim}, expected {n}")
    U11 = Z[:n, :n]
    U21 = Z[n:, :n]
    if np.linalg.cond(U11) > 1e14:
        raise RiccatiError("stable subspace is not a graph subspace (system not stabilizable)")
    return _sym(np.linalg.solve(U11.T, U21.T).T)


def solve_care(A, B, Q, R) -> tuple[np.ndarray, np.ndarray]:
    """Stabilizing solution of A'P + PA - PBR^-1B'P + Q = 0 and gain K = R^-1 B'P.

    Hamiltonian ordered-Schur solve followed by Newton-Kleinman polishing.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = _sym(np.asarray(Q, dtype=float))
    R = _sym(np.asarray(R, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    n = A.shape[0]
    if B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("inconsistent dimensions")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
            and np.all(np.isfinite(Q)) and np.all(np.isfinite(R))):
        raise RiccatiError("non-finite problem data")

    G = _sym(B @ np.linalg.solve(R, B.T))
    P = _schur_care(A, G, Q)

    def residual(P):
        return np.linalg.norm(A.T @ P + P @ A - P @ G @ P + Q)

    res = residual(P)
    tol = 1e-9 * (1.0 + np.linalg.norm(P))
    for _ in range(NEWTON_MAX_ITER):
        K = np.linalg.solve(R, B.T @ P)
        Ak = A - B @ K
        if not is_hurwitz(Ak):
            break
        P_new = solve_lyapunov(Ak.T, Q + K.T @ R @ K)
        res_new = residual(P_new)
        if not res_new < res:
            break
        P, res = P_new, res_new
        tol = 1e-9 * (1.0 + np.linalg.norm(P))
        if res <= 0.01 * tol:
            break

    K = np.linalg.solve(R, B.T @ P)
    if not res <= tol:
        raise RiccatiError(f"CARE residual {res:.3e} exceeds tolerance {tol:.3e}")
    if not is_hurwitz(A - B @ K):
        raise RiccatiError("closed loop A - BK is not Hurwitz")
    return P, K


def solve_kalman(A, C, W, V) -> tuple[np.ndarray, np.ndarray]:
    """Steady-state Kalman-Bucy covariance P and gain L = P C' V^-1 (by duality)."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    V = np.asarray(V, dtype=float) + V_REGULARIZATION * np.eye(C.shape[0])
    P, Kd = solve_care(A.T, C.T, W, V)
    L = Kd.T
    if not is_hurwitz(A - L @ C):
        raise RiccatiError("estimator A - LC is not Hurwitz")
    return P, L


@dataclass(frozen=True)
class LqgWeights:
    """Cholesky factors of Q and R plus the noise covariances W and V."""

    L_Q: np.ndarray
    L_R: np.ndarray
    W: np.ndarray | None = None
    V: np.ndarray | None = None

    @property
    def Q(self) -> np.ndarray:
        # huge factors overflow to inf; callers treat that as an invalid candidate
        with np.errstate(over="ignore", invalid="ignore"):
            return self.L_Q @ self.L_Q.T

    @property
    def R(self) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return self.L_R @ self.L_R.T

    def with_noise(self, W, V) -> "LqgWeights":
        return LqgWeights(self.L_Q, self.L_R, np.asarray(W, float), np.asarray(V, float))

    @classmethod
    def from_matrices(cls, Q, R, W=None, V=None) -> "LqgWeights":
        """Factor PD matrices; a tiny diagonal jitter is added for PSD Q."""
        Q = _sym(np.asarray(Q, dtype=float))
        R = _sym(np.asarray(R, dtype=float))
        try:
            L_Q = np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            L_Q = np.linalg.cholesky(Q + DIAG_FLOOR**2 * np.eye(len(Q)))
        L_R = np.linalg.cholesky(R)
        return cls(L_Q, L_R,
                   None if W is None else np.asarray(W, float),
                   None if V is None else np.asarray(V, float))


@dataclass(frozen=True)
class LqgGains:
    K: np.ndarray
    L: np.ndarray
    P_ctrl: np.ndarray
    P_est: np.ndarray


def _diag_map(x):
    # log-scale diagonal: a unit step in the parameter multiplies the weight
    # by e^2, so the search covers many orders of magnitude evenly
    with np.errstate(over="ignore"):
        return np.exp(np.clip(x, -700.0, 700.0))


def diag_to_param(d):
    """Parameter value whose mapped Cholesky diagonal equals ``d`` (d > DIAG_FLOOR)."""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(d, dtype=float) - DIAG_FLOOR)


def _tril_indices(n):
    # row-major lower triangle: (0,0), (1,0), (1,1), (2,0), ...
    return np.tril_indices(n)


def _fill(theta_part, n):
    L = np.zeros((n, n))
    rows, cols = _tril_indices(n)
    L[rows, cols] = theta_part
    d = np.arange(n)
    L[d, d] = _diag_map(L[d, d]) + DIAG_FLOOR
    return L


def weights_from_params(theta, W=None, V=None) -> LqgWeights:
    """Build (L_Q, L_R) from the flat 88-vector.

    The first 78 entries fill the lower triangle of L_Q row by row, the last 10
    fill L_R. Diagonal slots go through exp(.) + 1e-8 so every finite
    vector yields Q >= 0 and R > 0.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_PARAMS,):
        raise ValueError(f"expected {N_PARAMS} parameters, got shape {theta.shape}")
    nq = N_STATES * (N_STATES + 1) // 2
    return LqgWeights(
        _fill(theta[:nq], N_STATES),
        _fill(theta[nq:], N_INPUTS),
        None if W is None else np.asarray(W, float),
        None if V is None else np.asarray(V, float),
    )


def _extract(L):
    L = np.array(L, dtype=float)
    n = L.shape[0]
    d = np.arange(n)
    L[d, d] = diag_to_param(L[d, d])
    return L[_tril_indices(n)]


def params_from_weights(weights: LqgWeights) -> np.ndarray:
    return np.concatenate([_extract(weights.L_Q), _extract(weights.L_R)])


def synthesize(model: LinearModel, weights: LqgWeights, kalman=None) -> LqgGains:
    """LQR gain from (Q, R) and Kalman gain from (W, V).

    ``kalman`` may carry a precomputed (P_est, L) pair, which is reused as is.
    """
    P_c, K = solve_care(model.A, model.B, weights.Q, weights.R)
    if kalman is None:
        if weights.W is None or weights.V is None:
            raise ValueError("noise covariances W and V are required for the Kalman gain")
        kalman = solve_kalman(model.A, model.C, weights.W, weights.V)
    P_e, L = kalman
    return LqgGains(K=K, L=L, P_ctrl=P_c, P_est=P_e)


def closed_loop_matrix(model: LinearModel, gains: LqgGains) -> np.ndarray:
    """Plant/estimation-error dynamics [[A-BK, BK], [0, A-LC]] over (x, e)."""
    A, B, C = model.A, model.B, model.C
    K, L = gains.K, gains.L
    n = A.shape[0]
    return np.block([[A - B @ K, B @ K], [np.zeros((n, n)), A - L @ C]])

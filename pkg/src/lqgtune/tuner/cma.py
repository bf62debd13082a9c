"""Covariance matrix adaptation evolution strategy (ask/tell as a pure step)."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

EIGEN_FLOOR = 1e-14


def default_popsize(n: int) -> int:
    return 4 + int(math.floor(3 * math.log(n)))


@dataclass
class CMAState:
    mean: np.ndarray
    sigma: float
    popsize: int
    rng: np.random.Generator
    C: np.ndarray = None
    p_sigma: np.ndarray = None
    p_c: np.ndarray = None
    eig_B: np.ndarray = None
    eig_D: np.ndarray = None
    generation: int = 0
    repairs: int = 0
    pending: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.mean)
        self.mean = np.asarray(self.mean, dtype=float)
        if self.C is None:
            self.C = np.eye(n)
            self.eig_B = np.eye(n)
            self.eig_D = np.ones(n)
        if self.p_sigma is None:
            self.p_sigma = np.zeros(n)
            self.p_c = np.zeros(n)

    @classmethod
    def initial(cls, mean, sigma: float, popsize: int | None = None, seed: int = 0) -> "CMAState":
        mean = np.asarray(mean, dtype=float)
        if popsize is None:
            popsize = default_popsize(len(mean))
        if popsize < 2:
            raise ValueError("CMA-ES needs popsize >= 2")
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        return cls(mean=mean.copy(), sigma=float(sigma), popsize=int(popsize),
                   rng=np.random.default_rng(seed))


@dataclass(frozen=True)
class _Constants:
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float


def _constants(n: int, lam: int) -> _Constants:
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mu_eff = 1.0 / np.sum(w**2)
    c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
    c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))
    return _Constants(mu, w, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n)


def _update(s: CMAState, costs) -> None:
    n = len(s.mean)
    k = _constants(n, s.popsize)
    y = s.pending
    order = np.argsort(np.asarray(costs, dtype=float), kind="stable")
    y_sel = y[order[: k.mu]]
    y_w = k.weights @ y_sel

    s.mean = s.mean + s.sigma * y_w
    # C^{-1/2} y_w
    c_inv_sqrt_yw = s.eig_B @ ((s.eig_B.T @ y_w) / s.eig_D)
    s.p_sigma = (1 - k.c_sigma) * s.p_sigma + math.sqrt(k.c_sigma * (2 - k.c_sigma) * k.mu_eff) * c_inv_sqrt_yw
    norm_ps = np.linalg.norm(s.p_sigma)
    g = s.generation + 1
    h_sigma = norm_ps / math.sqrt(1 - (1 - k.c_sigma) ** (2 * g)) < (1.4 + 2 / (n + 1)) * k.chi_n
    s.p_c = (1 - k.c_c) * s.p_c + h_sigma * math.sqrt(k.c_c * (2 - k.c_c) * k.mu_eff) * y_w

    rank_mu = (y_sel.T * k.weights) @ y_sel
    delta_h = (1 - h_sigma) * k.c_c * (2 - k.c_c)
    s.C = ((1 - k.c_1 - k.c_mu + k.c_1 * delta_h) * s.C
           + k.c_1 * np.outer(s.p_c, s.p_c)
           + k.c_mu * rank_mu)
    s.C = 0.5 * (s.C + s.C.T)
    # cap the log step change at 1 per generation, as in the reference implementation
    s.sigma *= math.exp(min(1.0, (k.c_sigma / k.d_sigma) * (norm_ps / k.chi_n - 1)))

    vals, vecs = np.linalg.eigh(s.C)
    if vals.min() < EIGEN_FLOOR:
        vals = np.maximum(vals, EIGEN_FLOOR)
        s.C = (vecs * vals) @ vecs.T
        s.repairs += 1
    s.eig_B, s.eig_D = vecs, np.sqrt(vals)
    s.generation = g


def cma_step(state: CMAState, costs=None) -> tuple[CMAState, np.ndarray]:
    """Fold in the costs of the previous batch (if any) and sample a new one.

    Returns a new state; the input state is left untouched. Covariance
    eigenvalues below 1e-14 are floored and counted in ``repairs``.
    """
    s = copy.deepcopy(state)
    if costs is not None:
        if s.pending is None:
            raise ValueError("costs given but no batch is pending")
        if len(costs) != s.popsize:
            raise ValueError("need one cost per pending candidate")
        _update(s, costs)
    z = s.rng.standard_normal((s.popsize, len(s.mean)))
    y = (z * s.eig_D) @ s.eig_B.T
    s.pending = y
    return s, s.mean + s.sigma * y

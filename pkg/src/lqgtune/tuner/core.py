"""Outer-loop weight tuning: candidate evaluation, optimizer driver, baselines."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from typing import Callable

import numpy as np

from ..dynamics import LinearModel, QuadrotorParams
from ..riccati import (
    N_PARAMS,
    LqgWeights,
    RiccatiError,
    params_from_weights,
    solve_care,
    solve_kalman,
    weights_from_params,
)
from ..simulation import SimConfig, _Rollout, outer_cost, outer_penalty
from .cma import CMAState, cma_step, default_popsize
from .ga import GAState, ga_step
from .pso import PSOState, pso_step

log = logging.getLogger(__name__)

METHODS = ("CMA", "PS", "GA", "BR", "MT")
POPULATION_METHODS = ("CMA", "PS", "GA")

# Bryson deviations: position (m), body velocity (m/s), Euler angles (rad), rates (rad/s)
DEFAULT_MAX_DEV_X = (0.2, 0.2, 0.2, 0.5, 0.5, 0.5, 0.2, 0.2, 0.2, 1.0, 1.0, 1.0)
# thrust (N), roll/pitch/yaw torque (N m)
DEFAULT_MAX_DEV_U = (2.0, 0.2, 0.2, 0.2)


def brysons_rule(max_dev_x, max_dev_u) -> LqgWeights:
    """Diagonal weights Q_ii = 1/dx_i^2, R_jj = 1/du_j^2."""
    dx = np.asarray(max_dev_x, dtype=float)
    du = np.asarray(max_dev_u, dtype=float)
    if dx.shape != (12,) or du.shape != (4,):
        raise ValueError("expected 12 state and 4 input deviations")
    if np.any(~(dx > 0)) or np.any(~(du > 0)):
        raise ValueError("maximum deviations must be positive")
    return LqgWeights(np.diag(1.0 / dx), np.diag(1.0 / du))


@dataclass
class TuningContext:
    """Everything a candidate evaluation needs besides the weights."""

    model: LinearModel
    params: QuadrotorParams
    W: np.ndarray
    V: np.ndarray
    sim: SimConfig = field(default_factory=SimConfig)
    lam: float = 0.1
    max_dev_x: tuple = DEFAULT_MAX_DEV_X
    max_dev_u: tuple = DEFAULT_MAX_DEV_U
    # False keeps W, V in the Kalman design but injects no noise in rollouts
    noisy: bool = True
    _kalman: tuple | None = field(default=None, repr=False, compare=False)
    _rollout: _Rollout | None = field(default=None, repr=False, compare=False)

    def kalman(self):
        if self._kalman is None:
            self._kalman = solve_kalman(self.model.A, self.model.C, self.W, self.V)
        return self._kalman

    def rollout(self) -> _Rollout:
        """Noise draws and matrices shared by every candidate (common random numbers)."""
        if self._rollout is None:
            noise = LqgWeights(np.eye(12), np.eye(4), self.W, self.V) if self.noisy \
                else LqgWeights(np.eye(12), np.eye(4))
            self._rollout = _Rollout(self.model, self.params, self.kalman()[1], noise, self.sim)
        return self._rollout

    def with_seed(self, seed: int) -> "TuningContext":
        from dataclasses import replace

        return TuningContext(self.model, self.params, self.W, self.V,
                             replace(self.sim, seed=seed), self.lam,
                             self.max_dev_x, self.max_dev_u, self.noisy, _kalman=self._kalman)

    def bryson_weights(self) -> LqgWeights:
        return brysons_rule(self.max_dev_x, self.max_dev_u).with_noise(self.W, self.V)

    def bryson_theta(self) -> np.ndarray:
        return params_from_weights(self.bryson_weights())

    def weights(self, theta) -> LqgWeights:
        return weights_from_params(theta, self.W, self.V)


def evaluate_weights(weights: LqgWeights, ctx: TuningContext) -> float:
    """Outer cost of a weight set; synthesis failures map to the divergence penalty."""
    try:
        _, K = solve_care(ctx.model.A, ctx.model.B, weights.Q, weights.R)
    except (RiccatiError, np.linalg.LinAlgError, FloatingPointError, ValueError):
        return outer_penalty(0.0, ctx.sim.horizon)
    traj = ctx.rollout().run(K)
    J = outer_cost(traj, ctx.lam)
    return J if math.isfinite(J) else outer_penalty(0.0, ctx.sim.horizon)


def evaluate_candidate(theta, ctx: TuningContext) -> float:
    """J_out for a flat 88-parameter vector. Never raises for finite input."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return outer_penalty(0.0, ctx.sim.horizon)
    return evaluate_weights(weights_from_params(theta), ctx)


@dataclass
class OptimizerConfig:
    method: str = "CMA"
    budget: int = 2000
    popsize: int | None = None
    seed: int = 0
    tol: float = 0.05
    sigma0: float = 0.3
    box: float = 10.0
    pso_inertia: float = 0.7298
    pso_cognitive: float = 1.49618
    pso_social: float = 1.49618
    ga_crossover: float = 0.9
    ga_mutation: float = 0.2
    ga_mutation_scale: float = 1.0
    ga_tournament: int = 3
    ga_blend_alpha: float = 0.5
    manual_theta: tuple | None = None
    warm_start: bool = False  # PS/GA: put x0 into the initial population
    workers: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.tol > 0:
            raise ValueError("tolerance must be > 0")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    def resolved_popsize(self, dim: int) -> int:
        if self.popsize is not None:
            return int(self.popsize)
        return {"CMA": default_popsize(dim), "PS": 30, "GA": 40}.get(self.method, 1)

    def fingerprint(self, x0) -> str:
        d = asdict(self)
        d.pop("workers")
        d["x0"] = None if x0 is None else [float(v) for v in x0]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TuneResult:
    method: str
    best_theta: np.ndarray
    best_cost: float
    evaluations: int
    trace: list
    pop_mean: list
    pop_std: list
    converged: bool
    wall_time: float
    covariance_repairs: int = 0

    @property
    def generations(self) -> int:
        return len(self.trace)

    def best_weights(self, W=None, V=None) -> LqgWeights:
        return weights_from_params(self.best_theta, W, V)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "schema": "tune_result",
            "schema_version": 1,
            "method": self.method,
            "best_cost": self.best_cost,
            "evaluations": self.evaluations,
            "generations": self.generations,
            "converged": self.converged,
            "covariance_repairs": self.covariance_repairs,
            "theta": self.best_theta.tolist(),
            "trace": list(self.trace),
            "pop_mean": list(self.pop_mean),
            "pop_std": list(self.pop_std),
        }
        if len(self.best_theta) == N_PARAMS:
            w = self.best_weights()
            d["Q"] = w.Q.ravel().tolist()
            d["R"] = w.R.ravel().tolist()
        if include_timing:
            d["wall_time"] = self.wall_time
        return d


# --- checkpoint encoding -------------------------------------------------

_STATE_TYPES = {"CMAState": CMAState, "PSOState": PSOState, "GAState": GAState}


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.tolist(), "dtype": str(value.dtype)}
    if isinstance(value, np.random.Generator):
        return {"__rng__": value.bit_generator.state}
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def _decode(value):
    if isinstance(value, dict) and "__ndarray__" in value:
        return np.array(value["__ndarray__"], dtype=value["dtype"])
    if isinstance(value, dict) and "__rng__" in value:
        rng = np.random.default_rng()
        rng.bit_generator.state = value["__rng__"]
        return rng
    return value


def encode_state(state) -> dict:
    return {"type": type(state).__name__,
            "fields": {f.name: _encode(getattr(state, f.name)) for f in fields(state)}}


def decode_state(d: dict):
    cls = _STATE_TYPES[d["type"]]
    return cls(**{k: _decode(v) for k, v in d["fields"].items()})


def _write_json_atomic(path, payload) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


# --- driver -----------------------------------------------------------------

def _evaluate_batch(objective, batch, pool):
    if pool is None:
        return [float(objective(x)) for x in batch]
    # map preserves candidate order, so scheduling cannot change results
    return [float(c) for c in pool.map(objective, list(batch))]


def _initial_state(cfg: OptimizerConfig, dim: int, x0):
    pop = cfg.resolved_popsize(dim)
    if cfg.method == "CMA":
        mean = np.zeros(dim) if x0 is None else x0
        return CMAState.initial(mean, cfg.sigma0, pop, cfg.seed), cma_step
    seed_point = x0 if cfg.warm_start else None
    if cfg.method == "PS":
        return PSOState.initial(dim, pop, cfg.seed, cfg.box, cfg.pso_inertia,
                                cfg.pso_cognitive, cfg.pso_social, x0=seed_point), pso_step
    return GAState.initial(dim, pop, cfg.seed, cfg.box, cfg.ga_crossover, cfg.ga_mutation,
                           cfg.ga_mutation_scale, cfg.ga_tournament, cfg.ga_blend_alpha,
                           x0=seed_point), ga_step


def tune(cfg: OptimizerConfig, ctx: TuningContext | None = None, *,
         objective: Callable[[np.ndarray], float] | None = None, x0=None,
         dim: int | None = None, checkpoint: str | None = None,
         callback: Callable[[int, float], None] | None = None) -> TuneResult:
    """Run one outer-loop optimizer until the budget is spent or J_out < tol.

    ``objective`` replaces the LQG evaluation (used for benchmark functions);
    otherwise ``ctx`` is required. CMA centres its first generation on ``x0``
    (default: the Bryson-rule parameters of ``ctx``); PS and GA sample their
    box uniformly and add ``x0`` only with ``warm_start``. ``dim`` sizes the search
    when neither is available. With ``checkpoint`` set,
    state is saved after every generation and a matching checkpoint resumes.
    """
    start = time.perf_counter()
    if objective is None:
        if ctx is None:
            raise ValueError("either ctx or objective is required")
        objective = partial(evaluate_candidate, ctx=ctx)
    if x0 is None and ctx is not None:
        x0 = ctx.bryson_theta()
    x0 = None if x0 is None else np.asarray(x0, dtype=float)
    if dim is None:
        dim = N_PARAMS if x0 is None else len(x0)
    elif x0 is not None and len(x0) != dim:
        raise ValueError("x0 length does not match dim")

    if cfg.method in ("MT", "BR"):
        if cfg.method == "MT":
            if cfg.manual_theta is None:
                raise ValueError("MT needs manual_theta (the hand-tuned weights)")
            theta = np.asarray(cfg.manual_theta, dtype=float)
        else:
            if ctx is None:
                raise ValueError("BR needs a tuning context")
            theta = ctx.bryson_theta()
        J = float(objective(theta))
        return TuneResult(cfg.method, theta, J, 1, [J], [J], [0.0],
                          J < cfg.tol, time.perf_counter() - start)

    pop = cfg.resolved_popsize(dim)
    if cfg.budget < pop:
        raise ValueError(f"budget {cfg.budget} is smaller than one generation ({pop})")

    fp = cfg.fingerprint(x0)
    resumed = None
    if checkpoint and os.path.exists(checkpoint):
        with open(checkpoint) as fh:
            saved = json.load(fh)
        if saved.get("fingerprint") == fp:
            resumed = saved
        else:
            log.warning("ignoring checkpoint %s: configuration changed", checkpoint)

    if resumed:
        state = decode_state(resumed["state"])
        step = {"CMA": cma_step, "PS": pso_step, "GA": ga_step}[cfg.method]
        costs = resumed["costs"]
        best_theta = np.array(resumed["best_theta"])
        best_cost = resumed["best_cost"]
        evals = resumed["evaluations"]
        trace, pmean, pstd = resumed["trace"], resumed["pop_mean"], resumed["pop_std"]
        done = resumed["done"]
    else:
        state, step = _initial_state(cfg, dim, x0)
        costs = None
        best_theta, best_cost = None, math.inf
        evals = 0
        trace, pmean, pstd = [], [], []
        done = False

    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while not done:
            state, batch = step(state, costs)
            remaining = cfg.budget - evals
            if len(batch) > remaining:
                batch = batch[:remaining]
            costs = _evaluate_batch(objective, batch, pool)
            evals += len(costs)
            i = int(np.argmin(costs))
            if costs[i] < best_cost:
                best_cost, best_theta = costs[i], np.array(batch[i], dtype=float)
            trace.append(best_cost)
            finite = np.asarray(costs)[np.isfinite(costs)]
            pmean.append(float(finite.mean()) if finite.size else math.inf)
            pstd.append(float(finite.std()) if finite.size else 0.0)
            done = evals >= cfg.budget or best_cost < cfg.tol
            if checkpoint:
                _write_json_atomic(checkpoint, {
                    "fingerprint": fp, "state": encode_state(state), "costs": costs,
                    "best_theta": best_theta.tolist(), "best_cost": best_cost,
                    "evaluations": evals, "trace": trace, "pop_mean": pmean,
                    "pop_std": pstd, "done": done,
                })
            if callback is not None:
                callback(len(trace), best_cost)
    finally:
        if pool is not None:
            pool.shutdown()

    return TuneResult(
        method=cfg.method, best_theta=best_theta, best_cost=float(best_cost),
        evaluations=evals, trace=trace, pop_mean=pmean, pop_std=pstd,
        converged=best_cost < cfg.tol, wall_time=time.perf_counter() - start,
        covariance_repairs=getattr(state, "repairs", 0),
    )


# --- landscape ---------------------------------------------------------------

@dataclass
class Landscape:
    q_scales: np.ndarray
    r_scales: np.ndarray
    costs: np.ndarray  # (len(q_scales), len(r_scales))

    def rows(self):
        """(q, r, J) triples, q-major."""
        for i, q in enumerate(self.q_scales):
            for j, r in enumerate(self.r_scales):
                yield float(q), float(r), float(self.costs[i, j])

    @property
    def dynamic_range(self) -> float:
        return float(self.costs.max() / self.costs.min())

    def local_minima(self) -> list[tuple[int, int]]:
        """Interior cells strictly below all eight neighbours."""
        J = self.costs
        found = []
        for i in range(1, J.shape[0] - 1):
            for j in range(1, J.shape[1] - 1):
                block = J[i - 1:i + 2, j - 1:j + 2]
                if np.sum(block <= J[i, j]) == 1:
                    found.append((i, j))
        return found


def slice_weights(ctx: TuningContext, q_scale: float, r_scale: float) -> LqgWeights:
    """Bryson weights with the position block set to q*I3 and R = r*I4."""
    base = brysons_rule(ctx.max_dev_x, ctx.max_dev_u)
    Q = base.Q
    Q[:3, :3] = q_scale * np.eye(3)
    return LqgWeights.from_matrices(Q, r_scale * np.eye(4), ctx.W, ctx.V)


def landscape_scan(ctx: TuningContext, q_scales, r_scales) -> Landscape:
    """J_out over a 2-d slice through (|Q_xi|, |R|), other weights at Bryson values."""
    q_scales = np.asarray(q_scales, dtype=float)
    r_scales = np.asarray(r_scales, dtype=float)
    if np.any(q_scales <= 0) or np.any(r_scales <= 0):
        raise ValueError("grid scales must be positive")
    J = np.empty((len(q_scales), len(r_scales)))
    for i, q in enumerate(q_scales):
        for j, r in enumerate(r_scales):
            J[i, j] = evaluate_weights(slice_weights(ctx, q, r), ctx)
    return Landscape(q_scales, r_scales, J)

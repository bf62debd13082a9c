"""Global-best particle swarm optimization."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np


@dataclass
class PSOState:
    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_costs: np.ndarray
    lower: float
    upper: float
    inertia: float
    cognitive: float
    social: float
    rng: np.random.Generator
    generation: int = 0
    evaluated: bool = False

    @property
    def global_best(self) -> tuple[np.ndarray, float]:
        i = int(np.argmin(self.best_costs))
        return self.best_positions[i], float(self.best_costs[i])

    @classmethod
    def initial(cls, dim: int, popsize: int, seed: int = 0, box: float = 10.0,
                inertia: float = 0.7298, cognitive: float = 1.49618, social: float = 1.49618,
                x0=None) -> "PSOState":
        """Uniform swarm in [-box, box]^dim at rest; particle 0 placed at ``x0`` if given."""
        if popsize < 1:
            raise ValueError("swarm needs at least one particle")
        rng = np.random.default_rng(seed)
        X = rng.uniform(-box, box, size=(popsize, dim))
        if x0 is not None:
            X[0] = np.clip(x0, -box, box)
        return cls(
            positions=X,
            velocities=np.zeros_like(X),
            best_positions=X.copy(),
            best_costs=np.full(popsize, np.inf),
            lower=-float(box), upper=float(box),
            inertia=float(inertia), cognitive=float(cognitive), social=float(social),
            rng=rng,
        )


def pso_step(state: PSOState, costs=None) -> tuple[PSOState, np.ndarray]:
    """Record costs for the current positions, then move the swarm.

    The first call (no costs) returns the initial positions for evaluation.
    Velocities are clamped to the box width and positions to the box.
    """
    s = copy.deepcopy(state)
    if costs is None:
        if s.evaluated:
            raise ValueError("positions were already evaluated; pass their costs")
        return s, s.positions.copy()
    costs = np.asarray(costs, dtype=float)
    improved = costs < s.best_costs
    s.best_positions[improved] = s.positions[improved]
    s.best_costs[improved] = costs[improved]
    g_best, _ = s.global_best

    P, n = s.positions.shape
    r1 = s.rng.random((P, n))
    r2 = s.rng.random((P, n))
    width = s.upper - s.lower
    V = (s.inertia * s.velocities
         + s.cognitive * r1 * (s.best_positions - s.positions)
         + s.social * r2 * (g_best - s.positions))
    s.velocities = np.clip(V, -width, width)
    s.positions = np.clip(s.positions + s.velocities, s.lower, s.upper)
    s.generation += 1
    s.evaluated = True
    return s, s.positions.copy()

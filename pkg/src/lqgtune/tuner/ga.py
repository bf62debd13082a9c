"""Real-coded genetic algorithm: tournament selection, blend crossover,
Gaussian mutation and single-individual elitism."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np


@dataclass
class GAState:
    population: np.ndarray
    costs: np.ndarray
    crossover_rate: float
    mutation_rate: float
    mutation_scale: float
    tournament: int
    blend_alpha: float
    rng: np.random.Generator
    generation: int = 0
    pending: np.ndarray | None = None

    @property
    def best(self) -> tuple[np.ndarray, float]:
        i = int(np.argmin(self.costs))
        return self.population[i], float(self.costs[i])

    @classmethod
    def initial(cls, dim: int, popsize: int, seed: int = 0, box: float = 10.0,
                crossover_rate: float = 0.9, mutation_rate: float = 0.2,
                mutation_scale: float = 1.0, tournament: int = 3, blend_alpha: float = 0.5,
                x0=None) -> "GAState":
        if popsize < 2:
            raise ValueError("GA needs popsize >= 2")
        rng = np.random.default_rng(seed)
        pop = rng.uniform(-box, box, size=(popsize, dim))
        if x0 is not None:
            pop[0] = x0
        return cls(
            population=pop, costs=np.full(popsize, np.inf),
            crossover_rate=float(crossover_rate), mutation_rate=float(mutation_rate),
            mutation_scale=float(mutation_scale), tournament=int(tournament),
            blend_alpha=float(blend_alpha), rng=rng,
        )


def _tournament(s: GAState) -> np.ndarray:
    idx = s.rng.integers(0, len(s.population), size=s.tournament)
    # ties resolved toward the earliest drawn contestant
    return s.population[idx[np.argmin(s.costs[idx])]]


def _offspring(s: GAState, count: int) -> np.ndarray:
    n = s.population.shape[1]
    # mutation step follows the population spread so it shrinks as the GA converges
    spread = s.population.std(axis=0) + 1e-12
    children = np.empty((count, n))
    for i in range(count):
        a = _tournament(s)
        b = _tournament(s)
        if s.rng.random() < s.crossover_rate:
            u = s.rng.uniform(-s.blend_alpha, 1 + s.blend_alpha, size=n)
            child = a + u * (b - a)
        else:
            child = a.copy()
        mask = s.rng.random(n) < s.mutation_rate
        if mask.any():
            child[mask] += s.mutation_scale * spread[mask] * s.rng.standard_normal(mask.sum())
        children[i] = child
    return children


def ga_step(state: GAState, costs=None) -> tuple[GAState, np.ndarray]:
    """Fold in costs of the pending batch, then breed the next batch.

    The first call returns the initial population. Later batches hold
    popsize - 1 children; the best individual carries over unevaluated.
    """
    s = copy.deepcopy(state)
    P = len(s.population)
    if s.pending is None and s.generation == 0 and costs is None:
        s.pending = s.population.copy()
        return s, s.pending.copy()
    if costs is None or s.pending is None:
        raise ValueError("ga_step expects the costs of the pending batch")
    costs = np.asarray(costs, dtype=float)
    if s.generation == 0:
        s.costs = costs.copy()
    else:
        elite_x, elite_f = s.best
        s.population = np.vstack([elite_x[None, :], s.pending])
        s.costs = np.concatenate([[elite_f], costs])
    s.generation += 1
    s.pending = _offspring(s, P - 1)
    return s, s.pending.copy()

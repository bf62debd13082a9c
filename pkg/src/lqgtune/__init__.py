"""Bi-level LQG weight tuning for a hovering quadrotor.

An outer black-box optimizer searches Cholesky-parameterized Q and R; each
candidate is scored by LQG synthesis and a seeded closed-loop simulation.
"""

__version__ = "0.1.0"

from .dynamics import QuadrotorParams, hover_equilibrium, linearize
from .riccati import LqgWeights, solve_care, solve_kalman, synthesize
from .simulation import SimConfig, simulate

__all__ = [
    "QuadrotorParams", "hover_equilibrium", "linearize", "LqgWeights", "solve_care",
    "solve_kalman", "synthesize", "SimConfig", "simulate",
]

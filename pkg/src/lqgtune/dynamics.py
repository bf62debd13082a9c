"""Rigid-body quadrotor model, rotor mixing, hover equilibrium and linearization.

State layout (12): position xi^I (0:3), body velocity v^B (3:6),
Euler angles eta = (phi, theta, psi) (6:9), body rates omega^B (9:12).
Control layout (4): collective thrust u_z, roll/pitch/yaw torques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PITCH_LIMIT = math.pi / 2 - 1e-6

POSITION = slice(0, 3)
VELOCITY = slice(3, 6)
ATTITUDE = slice(6, 9)
RATES = slice(9, 12)

# Measured outputs: position and attitude.
MEASURED_STATES = (0, 1, 2, 6, 7, 8)


class SingularAttitudeError(ValueError):
    """Pitch too close to +-pi/2 for the Euler-rate map to be invertible."""


class RotorSpeedError(ValueError):
    """Rotor speed outside the configured limits."""


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return w if w.ndim else float(w)


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class QuadrotorParams:
    mass: float = 1.0
    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.01, 0.01, 0.02]))
    arm_length: float = 0.2
    thrust_coeff: float = 1e-5
    torque_coeff: float = 2e-7
    gravity: float = 9.81
    rotor_speed_min: float = 0.0
    rotor_speed_max: float = 1200.0

    def __post_init__(self):
        J = np.array(self.inertia, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        object.__setattr__(self, "inertia", J)
        J.setflags(write=False)
        for name in ("mass", "arm_length", "thrust_coeff", "torque_coeff", "gravity"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if J.shape != (3, 3) or not np.all(np.isfinite(J)):
            raise ValueError("inertia must be a finite 3x3 matrix")
        if not np.allclose(J, J.T, rtol=0, atol=1e-12 * max(1.0, np.abs(J).max())):
            raise ValueError("inertia must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0:
            raise ValueError("inertia must be positive definite")
        if not 0 <= self.rotor_speed_min < self.rotor_speed_max:
            raise ValueError("rotor speed limits must satisfy 0 <= min < max")

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.linalg.inv(self.inertia)

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "inertia": self.inertia.tolist(),
            "arm_length": self.arm_length,
            "thrust_coeff": self.thrust_coeff,
            "torque_coeff": self.torque_coeff,
            "gravity": self.gravity,
            "rotor_speed_min": self.rotor_speed_min,
            "rotor_speed_max": self.rotor_speed_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuadrotorParams":
        return cls(**d)


@dataclass(frozen=True)
class State12:
    """Augmented quadrotor state; yaw is wrapped to (-pi, pi] on construction."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    euler: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("position", "velocity", "euler", "rates"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        self.euler[2] = wrap_angle(self.euler[2])
        if abs(self.euler[0]) >= math.pi / 2 or abs(self.euler[1]) >= math.pi / 2:
            raise ValueError("roll and pitch must lie in (-pi/2, pi/2)")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.euler, self.rates])

    @classmethod
    def from_array(cls, x) -> "State12":
        x = np.asarray(x, dtype=float)
        return cls(x[POSITION], x[VELOCITY], x[ATTITUDE], x[RATES])


@dataclass(frozen=True)
class Control4:
    thrust: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise ValueError("control entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust, self.roll, self.pitch, self.yaw], dtype=float)

    @classmethod
    def from_array(cls, u) -> "Control4":
        return cls(*(float(v) for v in np.asarray(u, dtype=float).reshape(4)))


@dataclass(frozen=True)
class Equilibrium:
    state: State12
    control: Control4

    @property
    def x(self) -> np.ndarray:
        return self.state.as_array()

    @property
    def u(self) -> np.ndarray:
        return self.control.as_array()


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    equilibrium: Equilibrium

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "x_e": self.equilibrium.x.tolist(),
            "u_e": self.equilibrium.u.tolist(),
        }


def rotation_matrix(eta) -> np.ndarray:
    """Body-to-inertial rotation R_z(psi) R_y(theta) R_x(phi)."""
    phi, theta, psi = eta
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


def euler_rate_matrix(eta) -> np.ndarray:
    """Map from body rates (p, q, r) to Euler-angle rates."""
    phi, theta = eta[0], eta[1]
    if not abs(theta) < PITCH_LIMIT:
        raise SingularAttitudeError(f"pitch {theta!r} too close to +-pi/2")
    cf, sf = math.cos(phi), math.sin(phi)
    ct, tt = math.cos(theta), math.tan(theta)
    return np.array(
        [
            [1.0, sf * tt, cf * tt],
            [0.0, cf, -sf],
            [0.0, sf / ct, cf / ct],
        ]
    )


def _derivative(x, u, p: QuadrotorParams, force=None, torque=None) -> np.ndarray:
    # force is inertial-frame (N), torque body-frame (N m); both optional.
    v = x[VELOCITY]
    eta = x[ATTITUDE]
    w = x[RATES]
    R = rotation_matrix(eta)
    J = p.inertia

    accel = np.array([0.0, 0.0, u[0] / p.mass]) - np.cross(w, v) - p.gravity * R[2]
    tau = np.asarray(u[1:4], dtype=float) - np.cross(w, J @ w)
    if force is not None:
        accel = accel + (R.T @ force) / p.mass
    if torque is not None:
        tau = tau + torque

    out = np.empty(12)
    out[POSITION] = R @ v
    out[VELOCITY] = accel
    out[ATTITUDE] = euler_rate_matrix(eta) @ w
    out[RATES] = np.linalg.solve(J, tau)
    return out


def dynamics_derivative(x, u, p: QuadrotorParams) -> np.ndarray:
    """Time derivative of the 12-state under control (u_z, u_phi, u_theta, u_psi).

    Raises
    ------
    SingularAttitudeError
        If |theta| >= pi/2 - 1e-6.
    ValueError
        On non-finite input.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (12,) or u.shape != (4,):
        raise ValueError("expected x of shape (12,) and u of shape (4,)")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ValueError("non-finite state or control")
    return _derivative(x, u, p)


def mixing_matrix(p: QuadrotorParams) -> np.ndarray:
    """Linear map from squared rotor speeds to (u_z, u_phi, u_theta, u_psi)."""
    kT, kM, l = p.thrust_coeff, p.torque_coeff, p.arm_length
    return np.array(
        [
            [kT, kT, kT, kT],
            [0.0, -l * kT, 0.0, l * kT],
            [-l * kT, 0.0, l * kT, 0.0],
            # (-1)^i for motors i = 1..4
            [-kM, kM, -kM, kM],
        ]
    )


def motor_mixing(omega, p: QuadrotorParams) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < p.rotor_speed_min) or np.any(omega > p.rotor_speed_max):
        raise RotorSpeedError(
            f"rotor speeds {omega} outside [{p.rotor_speed_min}, {p.rotor_speed_max}]"
        )
    return mixing_matrix(p) @ omega**2


def inverse_mixing(u, p: QuadrotorParams) -> tuple[np.ndarray, bool]:
    """Squared rotor speeds producing ``u``.

    Negative solutions are clamped to zero; the second return value reports
    whether clamping happened.
    """
    omega_sq = np.linalg.solve(mixing_matrix(p), np.asarray(u, dtype=float))
    saturated = bool(np.any(omega_sq < 0))
    return np.maximum(omega_sq, 0.0), saturated


def hover_equilibrium(p: QuadrotorParams, position=(0.0, 0.0, 0.0), yaw: float = 0.0) -> Equilibrium:
    state = State12(position=position, euler=(0.0, 0.0, yaw))
    return Equilibrium(state, Control4(thrust=p.hover_thrust))


def output_matrix() -> np.ndarray:
    C = np.zeros((len(MEASURED_STATES), 12))
    C[np.arange(len(MEASURED_STATES)), MEASURED_STATES] = 1.0
    return C


def linearize(p: QuadrotorParams, eq: Equilibrium, position_block: str = "exact") -> LinearModel:
    """Analytic Jacobians of the nonlinear model at a hover equilibrium.

    ``position_block`` selects how d(xi_dot)/d(v) is formed: ``"exact"`` uses
    R(eta_e), which equals the true Jacobian for any yaw; ``"small_angle"``
    uses the first-order form I + skew(eta_e).
    """
    eta = eq.state.euler
    A = np.zeros((12, 12))
    if position_block == "exact":
        A[POSITION, VELOCITY] = rotation_matrix(eta)
    elif position_block == "small_angle":
        A[POSITION, VELOCITY] = np.eye(3) + skew(eta)
    else:
        raise ValueError(f"unknown position_block {position_block!r}")
    A[VELOCITY, ATTITUDE] = -skew([0.0, 0.0, p.gravity])
    A[ATTITUDE, RATES] = np.eye(3)

    B = np.zeros((12, 4))
    B[5, 0] = 1.0 / p.mass
    B[RATES, 1:4] = p.inertia_inv
    return LinearModel(A, B, output_matrix(), eq)


def finite_difference_jacobians(p: QuadrotorParams, x, u, step: float = 1e-6):
    """Central-difference Jacobians (A, B) of ``dynamics_derivative``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    A = np.empty((12, 12))
    B = np.empty((12, 4))
    for j in range(12):
        dx = np.zeros(12)
        dx[j] = step
        A[:, j] = (dynamics_derivative(x + dx, u, p) - dynamics_derivative(x - dx, u, p)) / (2 * step)
    for j in range(4):
        du = np.zeros(4)
        du[j] = step
        B[:, j] = (dynamics_derivative(x, u + du, p) - dynamics_derivative(x, u - du, p)) / (2 * step)
    return A, B

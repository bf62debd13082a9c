"""Seeded closed-loop LQG simulation, cost functionals and flight metrics.

The plant is either the nonlinear rigid-body model or its hover linearization,
integrated with fixed-step RK4 and Euler-Maruyama process noise. The estimator
is the continuous-time Kalman filter with the steady-state gain L, integrated
with RK4 over each step while the measurement and command are held.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dynamics import (
    ATTITUDE,
    PITCH_LIMIT,
    POSITION,
    SingularAttitudeError,
    LinearModel,
    QuadrotorParams,
    _derivative,
    mixing_matrix,
    rotation_matrix,
    wrap_angle,
)
from .riccati import LqgGains, LqgWeights

SCHEMA_VERSION = 1
DIVERGENCE_NORM = 1e6
PENALTY = 1e9

STATE_NAMES = ("x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r")
CONTROL_NAMES = ("u_z", "u_phi", "u_theta", "u_psi")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Parametric force/torque disturbance.

    ``force`` is inertial-frame (N), ``torque`` body-frame (N m). For
    ``one-cosine-gust`` the amplitudes are reached at mid-gust; ``impulse`` is a
    rectangular pulse of the given duration.
    """

    kind: str = "one-cosine-gust"
    onset: float = 1.0
    duration: float = 1.0
    force: tuple = (1.0, 1.0, 0.0)
    torque: tuple = (0.1, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("impulse", "one-cosine-gust", "none"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.onset < 0:
            raise ValueError("disturbance onset must be >= 0")
        if self.kind != "none" and not self.duration > 0:
            raise ValueError("disturbance duration must be > 0")
        object.__setattr__(self, "force", tuple(float(f) for f in self.force))
        object.__setattr__(self, "torque", tuple(float(f) for f in self.torque))

    def shape(self, t) -> np.ndarray:
        """Dimensionless profile in [0, 1] at time(s) t."""
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            return np.zeros_like(t)
        s = (t - self.onset) / self.duration
        inside = (s >= 0) & (s <= 1)
        if self.kind == "impulse":
            return inside.astype(float)
        return np.where(inside, 0.5 * (1 - np.cos(2 * np.pi * s)), 0.0)


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 10.0
    dt: float = 0.002
    plant: str = "linear"
    seed: int = 0
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    saturation: bool = True
    x0_offset: tuple | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not 0 < self.dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01]")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("horizon must be an integer multiple of dt")
        if self.plant not in ("linear", "nonlinear"):
            raise ValueError(f"unknown plant mode {self.plant!r}")
        if self.x0_offset is not None:
            object.__setattr__(self, "x0_offset", tuple(float(v) for v in self.x0_offset))
            if len(self.x0_offset) != 12:
                raise ValueError("x0_offset must have 12 entries")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


def angle_aware_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a - b over 12-state rows with yaw differences wrapped."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d[..., 8] = wrap_angle(d[..., 8])
    return d


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    u: np.ndarray
    rotor_thrust: np.ndarray
    saturated: np.ndarray
    x_ref: np.ndarray
    u_e: np.ndarray
    horizon: float
    diverged: bool = False
    divergence_time: float | None = None

    @property
    def estimation_error(self) -> np.ndarray:
        return angle_aware_diff(self.x, self.xhat)

    @property
    def control_error(self) -> np.ndarray:
        return angle_aware_diff(self.xhat, self.x_ref)

    @property
    def tracking_error(self) -> np.ndarray:
        """True-state deviation x - x_ref."""
        return angle_aware_diff(self.x, self.x_ref)

    def to_csv(self) -> str:
        header = {
            "schema": "trajectory",
            "schema_version": SCHEMA_VERSION,
            "x_ref": self.x_ref.tolist(),
            "u_e": self.u_e.tolist(),
            "horizon": self.horizon,
            "diverged": self.diverged,
            "divergence_time": self.divergence_time,
        }
        buf = io.StringIO()
        buf.write("# " + json.dumps(header) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(trajectory_columns())
        for k in range(len(self.t)):
            row = [self.t[k], *self.x[k], *self.xhat[k], *self.u[k], *self.rotor_thrust[k]]
            w.writerow([repr(float(v)) for v in row] + [int(self.saturated[k])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError("missing trajectory header line")
        header = json.loads(lines[0][2:])
        if header.get("schema") != "trajectory":
            raise ValueError("not a trajectory file")
        rows = list(csv.reader(lines[1:]))
        if tuple(rows[0]) != trajectory_columns():
            raise ValueError("unexpected trajectory columns")
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
        return cls(
            t=data[:, 0],
            x=data[:, 1:13],
            xhat=data[:, 13:25],
            u=data[:, 25:29],
            rotor_thrust=data[:, 29:33],
            saturated=data[:, 33].astype(bool),
            x_ref=np.array(header["x_ref"]),
            u_e=np.array(header["u_e"]),
            horizon=header["horizon"],
            diverged=header["diverged"],
            divergence_time=header["divergence_time"],
        )


def trajectory_columns() -> tuple:
    return (
        ("t",)
        + STATE_NAMES
        + tuple(f"{n}_hat" for n in STATE_NAMES)
        + CONTROL_NAMES
        + ("f1", "f2", "f3", "f4", "saturated")
    )


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (negative eigenvalues clipped)."""
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.T


def _rk4_affine(F: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of x' = F x + b (b held) as x -> Phi x + Gam b."""
    n = F.shape[0]
    M = h * F
    M2 = M @ M
    M3 = M2 @ M
    Phi = np.eye(n) + M + M2 / 2 + M3 / 6 + M3 @ M / 24
    Gam = h * (np.eye(n) + M / 2 + M2 / 6 + M3 / 24)
    return Phi, Gam


def _rk4_forcing(F: np.ndarray, h: float, b0, bm, b1) -> np.ndarray:
    """RK4 increment from a time-varying input sampled at t, t+h/2, t+h (rows)."""
    k1 = b0
    k2 = (h / 2) * k1 @ F.T + bm
    k3 = (h / 2) * k2 @ F.T + bm
    k4 = h * k3 @ F.T + b1
    return (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _disturbance_input(model: LinearModel, p: QuadrotorParams, spec: DisturbanceSpec, t) -> np.ndarray:
    # rows of state-derivative forcing at times t (linear plant)
    s = spec.shape(t)[:, None]
    R = rotation_matrix(model.equilibrium.state.euler)
    out = np.zeros((len(t), 12))
    out[:, 3:6] = s * (R.T @ np.asarray(spec.force) / p.mass)
    out[:, 9:12] = s * np.linalg.solve(p.inertia, np.asarray(spec.torque))
    return out


class _Rollout:
    """Seeded noise draws and controller-independent matrices for one config.

    Reused across candidate gains by the tuner (common random numbers).
    """

    def __init__(self, model: LinearModel, p: QuadrotorParams, L: np.ndarray,
                 noise: LqgWeights, cfg: SimConfig):
        self.model, self.p, self.cfg = model, p, cfg
        A, B, C = model.A, model.B, model.C
        n, m_y = A.shape[0], C.shape[0]
        N, h = cfg.n_steps, cfg.dt
        self.N, self.h = N, h
        self.t = np.arange(N + 1) * h

        W = np.zeros((n, n)) if noise.W is None else noise.W
        V = np.zeros((m_y, m_y)) if noise.V is None else noise.V
        rng = np.random.default_rng(cfg.seed)
        self.w = rng.standard_normal((N, n)) @ (math.sqrt(h) * _psd_sqrt(W))
        self.v = rng.standard_normal((N, m_y)) @ (_psd_sqrt(V) / math.sqrt(h))

        self.Ae = A - L @ C
        self.Phi_e, Gam_e = _rk4_affine(self.Ae, h)
        self.Gam_eB = Gam_e @ B
        self.Gam_eL = Gam_e @ L

        self.u_e = model.equilibrium.u
        self.x_e = model.equilibrium.x
        self.mix = mixing_matrix(p)
        self.mix_inv = np.linalg.inv(self.mix)
        self.w2_e = self.mix_inv @ self.u_e
        self.w2_lo = p.rotor_speed_min**2
        self.w2_hi = p.rotor_speed_max**2
        self.x0 = np.zeros(n) if cfg.x0_offset is None else np.asarray(cfg.x0_offset)

        if cfg.plant == "linear":
            self.Phi, Gam = _rk4_affine(A, h)
            self.Gam_B = Gam @ B
            d = cfg.disturbance
            self.forcing = _rk4_forcing(
                A, h,
                _disturbance_input(model, p, d, self.t[:-1]),
                _disturbance_input(model, p, d, self.t[:-1] + h / 2),
                _disturbance_input(model, p, d, self.t[1:]),
            )

    def _saturate(self, du):
        # returns (applied deviation, squared speeds, clamped?)
        w2 = self.w2_e + self.mix_inv @ du
        if not self.cfg.saturation:
            return du, w2, False
        if w2.min() < self.w2_lo or w2.max() > self.w2_hi:
            w2 = np.clip(w2, self.w2_lo, self.w2_hi)
            return self.mix @ w2 - self.u_e, w2, True
        return du, w2, False

    def run(self, K: np.ndarray) -> Trajectory:
        if self.cfg.plant == "linear":
            return self._run_linear(K)
        return self._run_nonlinear(K)

    def _finish(self, X, Xh, DU, W2, sat, last):
        # X, Xh are deviations; keep samples 0..last
        k = last + 1
        diverged = last < self.N
        return Trajectory(
            t=self.t[:k].copy(),
            x=self.x_e + X[:k],
            xhat=self.x_e + Xh[:k],
            u=self.u_e + DU[:k],
            rotor_thrust=self.p.thrust_coeff * W2[:k],
            saturated=sat[:k].copy(),
            x_ref=self.x_e.copy(),
            u_e=self.u_e.copy(),
            horizon=self.cfg.horizon,
            diverged=diverged,
            divergence_time=float(self.t[k]) if diverged else None,
        )

    def _run_linear(self, K):
        n = self.model.n_states
        N = self.N
        C = self.model.C
        # joint update z = (x, xhat):  z+ = M z + Nu du + noise
        M = np.zeros((2 * n, 2 * n))
        M[:n, :n] = self.Phi
        M[n:, :n] = self.Gam_eL @ C
        M[n:, n:] = self.Phi_e
        Nu = np.vstack([self.Gam_B, self.Gam_eB])
        Kz = np.hstack([np.zeros_like(K), -K])
        M_cl = M + Nu @ Kz
        W2z = self.mix_inv @ Kz
        noise = np.hstack([self.forcing + self.w, self.v @ self.Gam_eL.T])

        Z = np.empty((N + 1, 2 * n))
        z = np.concatenate([self.x0, np.zeros(n)])
        Z[0] = z
        sat = np.zeros(N + 1, dtype=bool)
        clamped = {}
        lo, hi, w2_e = self.w2_lo, self.w2_hi, self.w2_e
        limit2 = DIVERGENCE_NORM**2
        saturation = self.cfg.saturation
        last = N
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(N):
                if saturation:
                    w2 = w2_e + W2z @ z
                    if w2.min() < lo or w2.max() > hi:
                        w2 = np.clip(w2, lo, hi)
                        du = self.mix @ w2 - self.u_e
                        clamped[k] = (du, w2)
                        sat[k] = True
                        z = M @ z + Nu @ du + noise[k]
                    else:
                        z = M_cl @ z + noise[k]
                else:
                    z = M_cl @ z + noise[k]
                Z[k + 1] = z
                x = z[:n]
                if not (x @ x <= limit2 and abs(x[6]) < PITCH_LIMIT and abs(x[7]) < PITCH_LIMIT):
                    last = k
                    break

        X, Xh = Z[:, :n], Z[:, n:]
        DU = Xh @ -K.T
        W2 = w2_e + DU @ self.mix_inv.T
        for k, (du, w2) in clamped.items():
            DU[k], W2[k] = du, w2
        DU[last], W2[last], sat[last] = self._saturate(DU[last])
        return self._finish(X, Xh, DU, W2, sat, last)

    @staticmethod
    def _bad(x):
        return not (x @ x <= DIVERGENCE_NORM**2 and abs(x[6]) < PITCH_LIMIT and abs(x[7]) < PITCH_LIMIT)

    def _run_nonlinear(self, K):
        n = self.model.n_states
        N, h = self.N, self.h
        p, C, d = self.p, self.model.C, self.cfg.disturbance
        force = np.asarray(d.force)
        torque = np.asarray(d.torque)
        t = self.t

        X = np.empty((N + 1, n))
        Xh = np.empty((N + 1, n))
        DU = np.empty((N + 1, 4))
        W2 = np.empty((N + 1, 4))
        sat = np.zeros(N + 1, dtype=bool)
        x_abs = self.x_e + self.x0
        xh = np.zeros(n)
        last = N
        for k in range(N + 1):
            dev = angle_aware_diff(x_abs, self.x_e)
            X[k], Xh[k] = dev, xh
            du, w2, sat[k] = self._saturate(-K @ xh)
            DU[k], W2[k] = du, w2
            if k == N:
                break
            u = self.u_e + du
            tk = t[k]
            s0, sm, s1 = d.shape(np.array([tk, tk + h / 2, tk + h]))
            try:
                k1 = _derivative(x_abs, u, p, s0 * force, s0 * torque)
                k2 = _derivative(x_abs + h / 2 * k1, u, p, sm * force, sm * torque)
                k3 = _derivative(x_abs + h / 2 * k2, u, p, sm * force, sm * torque)
                k4 = _derivative(x_abs + h * k3, u, p, s1 * force, s1 * torque)
            except SingularAttitudeError:
                last = k
                break
            y = C @ dev + self.v[k]
            xh = self.Phi_e @ xh + self.Gam_eB @ du + self.Gam_eL @ y
            x_abs = x_abs + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4) + self.w[k]
            if self._bad(x_abs - self.x_e):
                last = k
                break
        return self._finish(X, Xh, DU, W2, sat, last)


def simulate(model: LinearModel, p: QuadrotorParams, gains: LqgGains,
             noise: LqgWeights, cfg: SimConfig) -> Trajectory:
    """Closed-loop rollout of plant + Kalman filter + LQR.

    The command is u = u_e - K (xhat - x_ref) with x_ref = x_e, held over each
    step. ``noise.W`` / ``noise.V`` are the process / measurement intensities
    (None means noise-free). Divergence (|x - x_e| > 1e6, non-finite state, or
    roll/pitch reaching +-pi/2) ends the run early with ``diverged`` set.
    """
    if gains.K.shape != (model.B.shape[1], model.n_states):
        raise ValueError("controller gain does not match the model dimensions")
    if gains.L.shape != (model.n_states, model.n_outputs):
        raise ValueError("estimator gain does not match the model dimensions")
    return _Rollout(model, p, gains.L, noise, cfg).run(gains.K)


def outer_penalty(divergence_time: float | None, horizon: float) -> float:
    """Cost assigned to a diverged run; earlier divergence costs more."""
    t = 0.0 if divergence_time is None else divergence_time
    return PENALTY * (1.0 + max(horizon - t, 0.0) / horizon)


def inner_cost(traj: Trajectory, weights: LqgWeights) -> float:
    """Time-averaged quadratic cost of deviations from the equilibrium."""
    if traj.diverged:
        return outer_penalty(traj.divergence_time, traj.horizon)
    dx = traj.tracking_error
    du = traj.u - traj.u_e
    integrand = np.einsum("ti,ij,tj->t", dx, weights.Q, dx) + np.einsum("ti,ij,tj->t", du, weights.R, du)
    T = traj.t[-1] - traj.t[0]
    return float(np.trapezoid(integrand, traj.t) / T)


def outer_cost(traj: Trajectory, lam: float = 0.1) -> float:
    """Integral of |eps_xi| + lam |eps_eta| with eps = xhat - x_ref."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if traj.diverged:
        return outer_penalty(traj.divergence_time, traj.horizon)
    eps = traj.control_error
    integrand = np.linalg.norm(eps[:, POSITION], axis=1) + lam * np.linalg.norm(eps[:, ATTITUDE], axis=1)
    return float(np.trapezoid(integrand, traj.t))


def propagate_covariance(A, W, P0, T: float, dt: float) -> np.ndarray:
    """RK4 integration of P' = A P + P A' + W from P0 over [0, T]."""
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    P = 0.5 * (np.asarray(P0, dtype=float) + np.asarray(P0, dtype=float).T)
    n_steps = int(round(T / dt))
    h = T / n_steps if n_steps else 0.0

    def f(P):
        return A @ P + P @ A.T + W

    for _ in range(n_steps):
        k1 = f(P)
        k2 = f(P + h / 2 * k1)
        k3 = f(P + h / 2 * k2)
        k4 = f(P + h * k3)
        P = P + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        P = 0.5 * (P + P.T)
    return P


def closed_loop_noise_covariance(model: LinearModel, gains: LqgGains, noise: LqgWeights) -> np.ndarray:
    """Intensity of the (x, e) noise input [[I, 0], [I, -L]] (w, v)."""
    n, m_y = model.n_states, model.n_outputs
    G = np.block([[np.eye(n), np.zeros((n, m_y))], [np.eye(n), -gains.L]])
    Wv = np.zeros((n + m_y, n + m_y))
    Wv[:n, :n] = noise.W
    Wv[n:, n:] = noise.V
    return G @ Wv @ G.T


def settling_time(t, signal, band: float = 0.02) -> float:
    """Last time |signal| exceeds band * peak, linearly interpolated."""
    t = np.asarray(t, dtype=float)
    s = np.abs(np.asarray(signal, dtype=float))
    peak = s.max(initial=0.0)
    if peak == 0:
        return 0.0
    level = band * peak
    above = np.nonzero(s > level)[0]
    k = above[-1]
    if k == len(s) - 1:
        return float(t[-1])
    # crossing between k and k+1
    frac = (s[k] - level) / (s[k] - s[k + 1])
    return float(t[k] + frac * (t[k + 1] - t[k]))


def overshoot_percent(signal: np.ndarray) -> float:
    """Largest excursion past zero after the peak, as % of the peak.

    ``signal`` is (T, d); the component holding the largest |peak| is used.
    """
    s = np.asarray(signal, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    k, j = np.unravel_index(np.argmax(np.abs(s)), s.shape)
    peak = s[k, j]
    if peak == 0:
        return 0.0
    after = -np.sign(peak) * s[k:, j]
    return float(100.0 * max(after.max(), 0.0) / abs(peak))


@dataclass
class RunMetrics:
    inner_cost: float
    outer_cost: float
    final_est_position: float
    final_ctrl_position: float
    final_est_attitude_deg: float
    final_ctrl_attitude_deg: float
    effort: float
    effort_deviation: float
    settling_time: float
    overshoot_pct: float
    peak_actuator: float
    estimation_rmse: float
    energy_proxy: float
    position_rmse: float
    attitude_rmse_deg: float
    tracking_integral: float
    final_true_position: float
    final_true_attitude_deg: float
    saturated_fraction: float
    diverged: bool
    divergence_time: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def columns(cls) -> tuple:
        return tuple(f.name for f in fields(cls))


def compute_metrics(traj: Trajectory, weights: LqgWeights, lam: float = 0.1) -> RunMetrics:
    """Scalar summary of a rollout. Angles are reported in degrees."""
    if traj.diverged:
        inf = math.inf
        pen = outer_penalty(traj.divergence_time, traj.horizon)
        return RunMetrics(
            inner_cost=pen, outer_cost=pen,
            final_est_position=inf, final_ctrl_position=inf,
            final_est_attitude_deg=inf, final_ctrl_attitude_deg=inf,
            effort=inf, effort_deviation=inf, settling_time=inf, overshoot_pct=inf,
            peak_actuator=inf, estimation_rmse=inf, energy_proxy=inf,
            position_rmse=inf, attitude_rmse_deg=inf, tracking_integral=inf,
            final_true_position=inf, final_true_attitude_deg=inf,
            saturated_fraction=float(traj.saturated.mean()) if len(traj.saturated) else 0.0,
            diverged=True, divergence_time=traj.divergence_time,
        )
    t = traj.t
    e = traj.estimation_error
    eps = traj.control_error
    trk = traj.tracking_error
    T = t[-1] - t[0]
    pos_err = np.linalg.norm(trk[:, POSITION], axis=1)
    att_err = np.linalg.norm(trk[:, ATTITUDE], axis=1)
    est_pos = np.linalg.norm(e[:, POSITION], axis=1)

    def rms(s):
        return float(math.sqrt(np.trapezoid(s**2, t) / T))

    return RunMetrics(
        inner_cost=inner_cost(traj, weights),
        outer_cost=outer_cost(traj, lam),
        final_est_position=float(np.linalg.norm(e[-1, POSITION])),
        final_ctrl_position=float(np.linalg.norm(eps[-1, POSITION])),
        final_est_attitude_deg=float(np.degrees(np.linalg.norm(e[-1, ATTITUDE]))),
        final_ctrl_attitude_deg=float(np.degrees(np.linalg.norm(eps[-1, ATTITUDE]))),
        effort=float(np.trapezoid(np.abs(traj.u).sum(axis=1), t)),
        effort_deviation=float(np.trapezoid(np.abs(traj.u - traj.u_e).sum(axis=1), t)),
        settling_time=settling_time(t, pos_err),
        overshoot_pct=overshoot_percent(trk[:, POSITION]),
        peak_actuator=float(traj.rotor_thrust.max()),
        estimation_rmse=rms(est_pos),
        energy_proxy=float(np.trapezoid(traj.u[:, 0], t)),
        position_rmse=rms(pos_err),
        attitude_rmse_deg=float(np.degrees(rms(att_err))),
        tracking_integral=float(np.trapezoid(np.linalg.norm(eps[:, POSITION], axis=1), t)),
        final_true_position=float(pos_err[-1]),
        final_true_attitude_deg=float(np.degrees(att_err[-1])),
        saturated_fraction=float(traj.saturated.mean()),
        diverged=False,
    )


def metrics_to_csv(rows: list[tuple[str, RunMetrics]]) -> str:
    """One row per run, labelled; stable column order from RunMetrics."""
    buf = io.StringIO()
    buf.write(f"# schema=run_metrics schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("run",) + RunMetrics.columns())
    for label, m in rows:
        w.writerow([label] + [repr(v) if isinstance(v, float) else v for v in asdict(m).values()])
    return buf.getvalue()

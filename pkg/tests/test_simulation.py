import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from lqgtune.dynamics import QuadrotorParams, hover_equilibrium, linearize
from lqgtune.riccati import LqgWeights, closed_loop_matrix, solve_lyapunov, synthesize
from lqgtune.simulation import (
    PENALTY,
    DisturbanceSpec,
    SimConfig,
    Trajectory,
    closed_loop_noise_covariance,
    compute_metrics,
    inner_cost,
    metrics_to_csv,
    outer_cost,
    outer_penalty,
    overshoot_percent,
    propagate_covariance,
    settling_time,
    simulate,
    trajectory_columns,
)

from .helpers import default_noise

CALM = DisturbanceSpec(kind="none")


@pytest.fixture(scope="module")
def hover():
    p = QuadrotorParams()
    m = linearize(p, hover_equilibrium(p))
    W, V = default_noise()
    w = LqgWeights.from_matrices(np.diag([25.0] * 3 + [4.0] * 3 + [25.0] * 3 + [1.0] * 3),
                                 np.diag([0.25, 25.0, 25.0, 25.0]), W, V)
    return p, m, w, synthesize(m, w)


def quiet(w):
    return LqgWeights(w.L_Q, w.L_R)


def make_traj(t, x_dev, u_dev=None, x_hat_dev=None):
    p = QuadrotorParams()
    eq = hover_equilibrium(p)
    n = len(t)
    u_dev = np.zeros((n, 4)) if u_dev is None else u_dev
    x_hat_dev = x_dev if x_hat_dev is None else x_hat_dev
    return Trajectory(
        t=t, x=eq.x + x_dev, xhat=eq.x + x_hat_dev, u=eq.u + u_dev,
        rotor_thrust=np.full((n, 4), eq.u[0] / 4), saturated=np.zeros(n, dtype=bool),
        x_ref=eq.x.copy(), u_e=eq.u.copy(), horizon=float(t[-1] - t[0]),
    )


@pytest.mark.parametrize("plant", ["linear", "nonlinear"])
def test_equilibrium_is_invariant_without_noise(hover, plant):
    p, m, w, g = hover
    cfg = SimConfig(horizon=2.0, plant=plant, disturbance=CALM)
    tr = simulate(m, p, g, quiet(w), cfg)
    assert not tr.diverged
    assert np.max(np.abs(tr.x - tr.x_ref)) <= 1e-9
    assert np.max(np.abs(tr.estimation_error)) <= 1e-9
    assert np.max(np.abs(tr.control_error)) <= 1e-9
    assert outer_cost(tr) <= 1e-9


def test_decay_rate_bounded_by_spectral_abscissa(hover):
    p, m, w, g = hover
    alpha = np.max(np.linalg.eigvals(closed_loop_matrix(m, g)).real)
    x0 = np.zeros(12)
    x0[0], x0[7] = 0.05, 0.02
    cfg = SimConfig(horizon=10.0, disturbance=CALM, x0_offset=x0, saturation=False)
    tr = simulate(m, p, g, quiet(w), cfg)
    err = np.hstack([tr.x - tr.x_ref, tr.estimation_error])
    norm = np.linalg.norm(err, axis=1)
    tail = (tr.t >= 4.0) & (tr.t <= 9.0)
    slope = np.polyfit(tr.t[tail], np.log(norm[tail]), 1)[0]
    assert slope <= alpha + 0.1 * abs(alpha)
    assert norm[-1] < norm[0]


def test_seeded_runs_are_bit_identical(hover):
    p, m, w, g = hover
    cfg = SimConfig(horizon=2.0, seed=42)
    a = simulate(m, p, g, w, cfg)
    b = simulate(m, p, g, w, cfg)
    assert a.to_csv() == b.to_csv()
    c = simulate(m, p, g, w, replace(cfg, seed=43))
    assert not np.array_equal(a.x, c.x)


def test_nonlinear_plant_tracks_linear_near_hover(hover):
    p, m, w, g = hover
    lin = simulate(m, p, g, w, SimConfig(horizon=4.0))
    nl = simulate(m, p, g, w, SimConfig(horizon=4.0, plant="nonlinear"))
    assert not lin.diverged and not nl.diverged
    # tilt costs vertical thrust only in the nonlinear plant, so z is left out
    d = np.abs(lin.x - nl.x).max(axis=0)
    assert d[[0, 1]].max() < 0.01
    assert d[6:9].max() < 0.01


def test_fragile_weights_diverge_with_saturation(hover):
    p, m, w, _ = hover
    W, V = default_noise()
    bad = LqgWeights.from_matrices(np.diag([1e5] * 3 + [1.0] * 6 + [0.01] * 3), 0.01 * np.eye(4), W, V)
    tr = simulate(m, p, synthesize(m, bad), bad, SimConfig())
    assert tr.diverged
    assert tr.saturated.mean() > 0.5
    assert tr.divergence_time == pytest.approx(tr.t[-1] + 0.002)
    metrics = compute_metrics(tr, bad)
    assert metrics.diverged
    assert metrics.outer_cost == outer_penalty(tr.divergence_time, 10.0)
    assert metrics.inner_cost == metrics.outer_cost


def test_dimension_mismatch_rejected(hover):
    p, m, w, g = hover
    with pytest.raises(ValueError):
        simulate(m, p, replace(g, K=np.zeros((4, 11))), w, SimConfig())


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.02)
    with pytest.raises(ValueError):
        SimConfig(horizon=1.0001, dt=0.002)
    with pytest.raises(ValueError):
        SimConfig(plant="hybrid")
    with pytest.raises(ValueError):
        DisturbanceSpec(onset=-1)
    with pytest.raises(ValueError):
        DisturbanceSpec(duration=0)


def test_gust_profile():
    d = DisturbanceSpec()
    assert d.shape(0.5) == 0
    assert d.shape(1.5) == pytest.approx(1.0)
    assert d.shape(2.5) == 0
    assert DisturbanceSpec(kind="impulse").shape(1.2) == 1.0


# --- costs --------------------------------------------------------------------

def test_inner_cost_trivial_cases():
    t = np.linspace(0, 3, 301)
    zero = make_traj(t, np.zeros((301, 12)))
    w = LqgWeights(np.eye(12), np.zeros((4, 4)))
    assert inner_cost(zero, w) == 0.0
    dx = np.tile(np.arange(12) * 0.1, (301, 1))
    assert inner_cost(make_traj(t, dx), w) == pytest.approx(np.sum((np.arange(12) * 0.1) ** 2), rel=1e-12)


def test_inner_cost_matches_fine_quadrature():
    rng = np.random.default_rng(5)
    a = rng.normal(0, 0.1, 12)
    f = rng.uniform(0.5, 3.0, 12)
    b = rng.normal(0, 0.5, 4)
    G = rng.normal(size=(12, 12))
    Q = G @ G.T
    R = np.diag(rng.uniform(0.1, 2.0, 4))
    T = 2.0
    t = np.linspace(0, T, 20001)
    dx = a * np.sin(np.outer(t, f))
    du = b * np.cos(np.outer(t, f[:4]))
    w = LqgWeights.from_matrices(Q, R)
    got = inner_cost(make_traj(t, dx, du), w)

    def integrand(s):
        x = a * np.sin(f * s)
        u = b * np.cos(f[:4] * s)
        return x @ Q @ x + u @ R @ u

    ref = integrate.quad(integrand, 0, T, limit=200, epsabs=1e-13, epsrel=1e-12)[0] / T
    assert got == pytest.approx(ref, rel=1e-6)


def test_outer_cost_cases():
    t = np.linspace(0, 10, 1001)
    assert outer_cost(make_traj(t, np.zeros((1001, 12)))) == 0.0
    dx = np.zeros((1001, 12))
    dx[:, 0] = 1.0
    assert outer_cost(make_traj(t, dx)) == pytest.approx(10.0, rel=1e-12)
    att = np.zeros((1001, 12))
    att[:, 6] = 0.2
    tr = make_traj(t, att)
    assert outer_cost(tr, lam=0.0) == 0.0
    assert outer_cost(tr, lam=1.0) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        outer_cost(tr, lam=-1)


def test_outer_cost_uses_estimate_not_truth():
    t = np.linspace(0, 1, 101)
    truth = np.zeros((101, 12))
    truth[:, 0] = 5.0
    tr = make_traj(t, truth, x_hat_dev=np.zeros((101, 12)))
    assert outer_cost(tr) == 0.0
    assert compute_metrics(tr, LqgWeights(np.eye(12), np.eye(4))).final_true_position == 5.0


def test_penalty_shape():
    assert outer_penalty(10.0, 10.0) == PENALTY
    assert outer_penalty(0.0, 10.0) == 2 * PENALTY
    assert outer_penalty(5.0, 10.0) == pytest.approx(1.5 * PENALTY)


def test_online_cost_equals_stored_csv_cost(hover):
    p, m, w, g = hover
    tr = simulate(m, p, g, w, SimConfig(horizon=3.0, seed=3))
    back = Trajectory.from_csv(tr.to_csv())
    assert abs(outer_cost(back) - outer_cost(tr)) <= 1e-12
    np.testing.assert_array_equal(back.x, tr.x)
    np.testing.assert_array_equal(back.saturated, tr.saturated)


def test_csv_layout(hover):
    p, m, w, g = hover
    text = simulate(m, p, g, w, SimConfig(horizon=0.1)).to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("# ") and '"schema_version": 1' in lines[0]
    assert lines[1].split(",") == list(trajectory_columns())
    assert len(lines) == 2 + 51
    with pytest.raises(ValueError):
        Trajectory.from_csv("t,x\n1,2\n")


# --- covariance ---------------------------------------------------------------

def test_covariance_homogeneous_decay():
    rng = np.random.default_rng(6)
    M = rng.normal(size=(4, 4))
    A = M - (np.max(np.linalg.eigvals(M).real) + 1.0) * np.eye(4)
    A = 0.5 * (A + A.T) - 2 * np.eye(4)  # symmetric Hurwitz so the trace decays monotonically
    traces = []
    P = np.eye(4)
    for _ in range(20):
        P = propagate_covariance(A, np.zeros((4, 4)), P, 0.5, 0.01)
        traces.append(np.trace(P))
    assert all(b <= a for a, b in zip(traces, traces[1:]))
    assert traces[-1] < 1e-12


def test_covariance_steady_state_matches_lyapunov():
    rng = np.random.default_rng(7)
    M = rng.normal(size=(5, 5))
    A = M - (np.max(np.linalg.eigvals(M).real) + 1.0) * np.eye(5)
    G = rng.normal(size=(5, 5))
    W = G @ G.T
    P = propagate_covariance(A, W, np.zeros((5, 5)), 40.0, 0.01)
    np.testing.assert_allclose(P, solve_lyapunov(A, W), atol=1e-6)
    np.testing.assert_array_equal(P, P.T)


def test_covariance_pure_diffusion():
    P = propagate_covariance([[0.0]], [[1.0]], [[0.0]], 3.0, 0.01)
    assert P[0, 0] == pytest.approx(3.0, rel=1e-12)


def test_monte_carlo_matches_propagated_covariance(hover):
    p, m, w, g = hover
    cfg = SimConfig(horizon=2.0, disturbance=CALM, saturation=False)
    finals = np.array([
        np.concatenate([tr.x[-1] - tr.x_ref, tr.estimation_error[-1]])
        for tr in (simulate(m, p, g, w, replace(cfg, seed=s)) for s in range(200))
    ])
    sample = np.cov(finals[:, :12].T)
    P = propagate_covariance(closed_loop_matrix(m, g), closed_loop_noise_covariance(m, g, w),
                             np.zeros((24, 24)), cfg.horizon, cfg.dt)
    pred = np.trace(P[:12, :12])
    assert abs(np.trace(sample) - pred) <= 0.25 * pred


# --- metrics -------------------------------------------------------------------

def test_settling_time_of_exponential():
    t = np.linspace(0, 10, 100001)
    assert settling_time(t, np.exp(-t)) == pytest.approx(math.log(50), abs=1e-4)
    assert settling_time(t, np.zeros_like(t)) == 0.0


def test_overshoot():
    t = np.linspace(0, 10, 10001)
    s = np.exp(-t) * np.cos(2 * t)
    ov = overshoot_percent(s)
    # first negative extremum of e^-t cos 2t, relative to the unit peak
    tm = (math.pi - math.atan(0.5)) / 2
    assert ov == pytest.approx(100 * math.exp(-tm) * abs(math.cos(2 * tm)), rel=1e-3)
    assert overshoot_percent(np.exp(-t)) == 0.0


def test_perfect_hover_energy_proxy(hover):
    p, m, w, g = hover
    tr = simulate(m, p, g, quiet(w), SimConfig(horizon=10.0, disturbance=CALM))
    met = compute_metrics(tr, w)
    assert met.energy_proxy == pytest.approx(98.1, rel=1e-12)
    assert met.effort == pytest.approx(98.1, rel=1e-12)
    assert met.effort_deviation == 0.0
    assert not met.diverged


def test_metrics_finite_and_csv(hover):
    p, m, w, g = hover
    tr = simulate(m, p, g, w, SimConfig(seed=1))
    met = compute_metrics(tr, w)
    d = met.to_dict()
    assert all(math.isfinite(v) for k, v in d.items() if k not in ("diverged", "divergence_time"))
    assert met.effort >= 0 and met.peak_actuator > 0
    assert met.final_ctrl_position == pytest.approx(np.linalg.norm(tr.control_error[-1, :3]))
    text = metrics_to_csv([("a", met)])
    assert text.splitlines()[1].split(",")[0] == "run"
    assert len(text.splitlines()) == 3

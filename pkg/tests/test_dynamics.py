from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import norm

from idefront.dynamics import Dynamics, SimState, Trajectory, extract_profile, front_position, track_front
from idefront.errors import FrontLostError, InsufficientDataError, ValidationError
from idefront.habitat import Grid, Habitat, load_config
from idefront.kernel import Gaussian, Laplace

from conftest import CONFIGS, E, two_patch_habitat


def small_dynamics(boundary="invasion", periods=8, k1=Gaussian(0.1), k2=Laplace(0.1), n=64):
    grid = Grid(10.0, n, periods)
    return Dynamics(two_patch_habitat(grid), k1, k2, grid, boundary)


def test_one_step_matches_dense_quadrature():
    dyn = small_dynamics(k2=Gaussian(0.05))
    x = dyn.x
    qs = dyn.grid.tile(dyn.q_star)
    p0 = np.where((x > -15) & (x < 12), qs, 0.0)
    s0 = SimState(p0.copy(), qs.copy(), 0)
    got = dyn.step(s0)
    hab = dyn.habitat
    cls = np.arange(x.size) % dyn.grid.n
    r1, b1, a1 = hab.r1.values[cls], hab.b1.values[cls], hab.a1.values[cls]
    r2, b2, a2 = hab.r2.values[cls], hab.b2.values[cls], hab.a2.values[cls]
    g1 = r1 * p0 / (1 + b1 * (p0 + a1 * qs))
    g2 = r2 * qs / (1 + b2 * (qs + a2 * p0))
    h = dyn.grid.h
    d = x[:, None] - x[None, :]
    K1 = norm.cdf(d + h / 2, scale=np.sqrt(0.1)) - norm.cdf(d - h / 2, scale=np.sqrt(0.1))
    K2 = norm.cdf(d + h / 2, scale=np.sqrt(0.05)) - norm.cdf(d - h / 2, scale=np.sqrt(0.05))
    inner = slice(2 * dyn.grid.n, x.size - 2 * dyn.grid.n)
    np.testing.assert_allclose(got.p[inner], (K1 @ g1)[inner], atol=1e-9)
    np.testing.assert_allclose(got.q[inner], (K2 @ g2)[inner], atol=1e-9)


def test_single_species_fixed_point_is_kept():
    grid = Grid(10.0, 64, 8)
    hab = Habitat.constant(grid, E, E, 1.0, 0.5, 1e-9, 1.0)
    dyn = Dynamics(hab, Gaussian(0.1), Gaussian(0.1), grid, "spread")
    s = dyn.step(SimState(np.ones(grid.sim_size), np.zeros(grid.sim_size), 0))
    inner = slice(0, grid.sim_size - 2 * grid.n)
    np.testing.assert_allclose(s.p[inner], 1.0, atol=1e-10)


def test_zero_stays_zero():
    dyn = small_dynamics("compact")
    z = np.zeros(dyn.size)
    traj = dyn.simulate(SimState(z, z.copy(), 0), 5)
    assert all(np.all(s.p == 0) and np.all(s.q == 0) for s in traj.states)


def test_cooperative_order_is_preserved():
    dyn = small_dynamics()
    rng = np.random.default_rng(11)
    qs = dyn.grid.tile(dyn.q_star)
    ps = dyn.grid.tile(dyn.p_star)
    worst = 0.0
    for _ in range(10):
        u = rng.uniform(0, 1, dyn.size) * ps
        v = rng.uniform(0, 1, dyn.size) * qs
        U = np.minimum(u + rng.uniform(0, 0.3, dyn.size) * ps, ps)
        V = np.minimum(v + rng.uniform(0, 0.3, dyn.size) * qs, qs)
        for _ in range(50):
            u, v = dyn.step_cooperative(u, v)
            U, V = dyn.step_cooperative(U, V)
            worst = max(worst, float(np.max(u - U)), float(np.max(v - V)))
    assert worst <= 1e-12


def test_more_competitor_means_less_invader():
    dyn = small_dynamics()
    s = dyn.initial_state("step")
    rng = np.random.default_rng(5)
    more = SimState(s.p.copy(), s.q + rng.uniform(0, 0.2, dyn.size), 0)
    a, b = dyn.simulate(s, 20), dyn.simulate(more, 20)
    for x, y in zip(a.states, b.states):
        assert np.all(y.p <= x.p + 1e-12)


def test_transform_round_trip():
    dyn = small_dynamics()
    s = dyn.initial_state("step")
    u, v = dyn.to_cooperative(s.p, s.q)
    worst = 0.0
    for _ in range(30):
        s = dyn.step(s)
        u, v = dyn.step_cooperative(u, v)
        p, q = dyn.from_cooperative(u, v)
        worst = max(worst, float(np.max(np.abs(p - s.p))), float(np.max(np.abs(q - s.q))))
    assert worst <= 1e-10


def test_deterministic_trajectories():
    dyn = small_dynamics()
    a = dyn.simulate(dyn.initial_state(), 10)
    b = dyn.simulate(dyn.initial_state(), 10)
    for x, y in zip(a.states, b.states):
        assert np.array_equal(x.p, y.p) and np.array_equal(x.q, y.q)


def test_front_position_interpolates():
    x = np.arange(5.0)
    assert front_position(np.array([1.0, 1.0, 0.6, 0.2, 0.0]), x, 0.4) == pytest.approx(2.5)
    assert np.isnan(front_position(np.zeros(5), x, 0.4))


@pytest.mark.parametrize("preset", ["patchy_laplace", "patchy_mixed"])
def test_invader_advances(preset):
    pr = load_config(CONFIGS / f"{preset}.toml")
    dyn = Dynamics(pr.habitat, pr.k1, pr.k2, pr.grid, pr.run.boundary)
    traj = dyn.simulate(dyn.initial_state(), 8)
    tr = track_front(traj)
    pos = dict(zip(tr.steps.tolist(), tr.positions.tolist()))
    assert pos[8] > pos[2]


def test_threshold_robustness():
    pr = load_config(CONFIGS / "single_species.toml")
    dyn = Dynamics(pr.habitat, pr.k1, pr.k2, pr.grid, pr.run.boundary)
    traj = dyn.simulate(dyn.initial_state(), 80)
    lo = track_front(traj, 0.1).speed
    hi = track_front(traj, 0.5).speed
    assert lo == pytest.approx(hi, rel=0.02)


def test_front_lost_near_guard():
    dyn = small_dynamics("spread", periods=4, k1=Laplace(1.0))
    traj = dyn.simulate(dyn.initial_state(), 10)
    with pytest.raises(FrontLostError) as info:
        track_front(traj)
    assert info.value.step > 0


def test_bad_inputs():
    dyn = small_dynamics()
    with pytest.raises(ValidationError):
        dyn.simulate(dyn.initial_state(), 0)
    with pytest.raises(ValidationError):
        Dynamics(dyn.habitat, dyn.k1, dyn.k2, dyn.grid, "reflect")
    traj = dyn.simulate(dyn.initial_state(), 3)
    with pytest.raises(InsufficientDataError):
        extract_profile(traj, 0.0)
    with pytest.raises(InsufficientDataError):
        extract_profile(traj, 0.3)


@pytest.fixture(scope="module")
def single_run():
    pr = load_config(CONFIGS / "single_species.toml")
    dyn = Dynamics(pr.habitat, pr.k1, pr.k2, pr.grid, pr.run.boundary)
    traj = dyn.simulate(dyn.initial_state(), 80)
    return traj, track_front(traj, 0.25).speed


def test_profile_at_tracked_speed(single_run):
    traj, c = single_run
    prof = extract_profile(traj, c)
    assert prof.monotonicity_defect <= 1e-2
    # the front is still accelerating toward its asymptotic speed after 80 steps
    assert prof.period_defect <= 2.5e-2
    assert prof.U.shape == (prof.xi.size, traj.dynamics.grid.n)


def test_profile_in_wrong_frame_drifts(single_run):
    traj, c = single_run
    assert extract_profile(traj, 2 * c).period_defect > 0.5

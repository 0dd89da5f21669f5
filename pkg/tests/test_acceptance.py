"""One test per acceptance criterion, with the tolerances pinned here."""
from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from idefront.cli import dispatch
from idefront.dynamics import Dynamics, track_front
from idefront.eigen import LEFTWARD, RIGHTWARD, assemble, dense_eigen, eigenvalue, principal_eigen
from idefront.habitat import Grid, Habitat, PeriodicField, load_config, piecewise_two_patch
from idefront.kernel import Gaussian, Laplace
from idefront.speeds import (RecursionSystem, check_hypotheses, determinacy_verdict,
                             recursion_bracket, spreading_speed, verify_upper_solution)
from idefront.steady import scalar_steady_state, semi_trivial_states

from conftest import CONFIGS, E, equal_competition, two_patch_habitat

C_GAUSS = math.sqrt(2 * 0.1 * 1.0)
MU_GAUSS = math.sqrt(2 * 1.0 / 0.1)


def detail(record, text):
    record("detail", text)


def laplace_brute_force(samples=100_000, b=0.5):
    mu = np.linspace(0.0, 1.0 / b, samples + 2)[1:-1]
    g = (1.0 - np.log(1.0 - (b * mu) ** 2)) / mu
    return float(g.min())


def random_two_patch(rng, grid):
    lo, hi = rng.uniform(0.3, 3.0, 2)
    return piecewise_two_patch(grid.L, rng.uniform(1.0, 9.0), lo, hi, grid)


@pytest.mark.criterion(1, "closed-form Gaussian speed")
def test_closed_form_speed(record_property):
    grid = Grid(10.0, 256)
    t0 = time.perf_counter()
    rep = spreading_speed(PeriodicField.constant(E, grid), Gaussian(0.1), grid)
    elapsed = time.perf_counter() - t0
    detail(record_property, f"c={rep.c:.7f} mu0={rep.mu0:.5f} in {elapsed:.2f}s")
    assert abs(rep.c - C_GAUSS) <= 1e-4
    assert abs(rep.mu0 - MU_GAUSS) <= 1e-3
    assert elapsed < 5.0


@pytest.mark.criterion(2, "Laplace speed against brute force")
def test_laplace_speed(record_property):
    grid = Grid(10.0, 128)
    rep = spreading_speed(PeriodicField.constant(E, grid), Laplace(0.5), grid)
    ref = laplace_brute_force()
    detail(record_property, f"c={rep.c:.8f} brute force={ref:.8f}")
    assert abs(rep.c - ref) <= 1e-5 * ref
    assert abs(rep.c - 1.191) < 1e-3


@pytest.mark.criterion(3, "power iteration against dense eigendecomposition")
def test_eigen_oracle(record_property):
    grid = Grid(10.0, 64)
    rng = np.random.default_rng(20)
    worst = 0.0
    for i in range(20):
        m = random_two_patch(rng, grid)
        k = Gaussian(rng.uniform(0.05, 1.0)) if i % 2 else Laplace(rng.uniform(0.1, 1.0))
        mu = rng.uniform(0.0, 0.9 * min(k.abscissa, 3.0))
        op = assemble(m, k, grid, float(mu), RIGHTWARD if i % 3 else LEFTWARD)
        res = principal_eigen(op)
        lam, _ = dense_eigen(op)
        worst = max(worst, abs(res.lam - lam) / lam)
        assert np.all(res.vector > 0)
    detail(record_property, f"max relative gap {worst:.2e}")
    assert worst <= 1e-8


@pytest.mark.criterion(4, "eigenvalue monotonicity, log-convexity and symmetry")
def test_eigen_properties(record_property):
    grid = Grid(10.0, 64)
    rng = np.random.default_rng(4)
    worst_convex = math.inf
    worst_sym = 0.0
    for i in range(12):
        m = random_two_patch(rng, grid)
        k = Laplace(0.5) if i % 2 else Gaussian(0.3)
        top = rng.uniform(0.3, 1.8)
        mus = np.sort(rng.uniform(-top, top, 9))
        mus = np.linspace(mus[0], mus[-1], 9)
        bigger = PeriodicField(m.values * rng.uniform(1.01, 1.5, grid.n), m.L)
        ln = []
        for mu in mus:
            lam = eigenvalue(m, k, grid, float(mu)).lam
            assert eigenvalue(bigger, k, grid, float(mu)).lam > lam
            worst_sym = max(worst_sym, abs(eigenvalue(m, k, grid, float(-mu)).lam - lam) / lam)
            ln.append(math.log(lam))
        ln = np.array(ln)
        dmu = mus[1] - mus[0]
        worst_convex = min(worst_convex, float(np.min((ln[2:] - 2 * ln[1:-1] + ln[:-2]) / dmu**2)))
    detail(record_property, f"min second difference {worst_convex:.2e}, symmetry gap {worst_sym:.2e}")
    assert worst_convex >= -1e-8
    assert worst_sym <= 1e-8


@pytest.mark.criterion(5, "steady states")
def test_steady_states(record_property):
    grid = Grid(10.0, 128)
    r = PeriodicField.constant(E, grid)
    C = PeriodicField.constant(0.8, grid)
    b = PeriodicField((r.values - 1) / C.values, grid.L)
    const = scalar_steady_state(r, b, Gaussian(0.1), grid).values
    hab = two_patch_habitat(grid)
    k = Gaussian(0.1)
    q = scalar_steady_state(hab.r2, hab.b2, k, grid).values
    rng = np.random.default_rng(5)
    spread = 0.0
    for _ in range(5):
        other = scalar_steady_state(hab.r2, hab.b2, k, grid, init=rng.uniform(0.01, 3.0, grid.n)).values
        spread = max(spread, float(np.max(np.abs(other - q))))
    C_M = max(hab.C1.max(), hab.C2.max())
    detail(record_property, f"|p*-C|={np.max(np.abs(const - 0.8)):.1e}, max q*={q.max():.6f}, "
                            f"start spread {spread:.1e}")
    assert np.max(np.abs(const - 0.8)) <= 1e-10
    assert q.max() <= C_M + 1e-8
    assert spread <= 1e-9


@pytest.mark.criterion(6, "simulated front speed against theory")
def test_front_speed(record_property):
    pr = load_config(CONFIGS / "single_species.toml")
    assert pr.grid.sim_periods == 40 and pr.run.boundary == "spread"
    t0 = time.perf_counter()
    dyn = Dynamics(pr.habitat, pr.k1, pr.k2, pr.grid, "spread")
    traj = dyn.simulate(dyn.initial_state(), 80)
    trace = track_front(traj, 0.25 * pr.habitat.C1.max())
    elapsed = time.perf_counter() - t0
    rel = abs(trace.speed - C_GAUSS) / C_GAUSS
    detail(record_property, f"c_hat={trace.speed:.5f} (off by {100 * rel:.2f}%) in {elapsed:.1f}s")
    assert rel <= 0.05
    assert elapsed < 60.0


@pytest.mark.slow
@pytest.mark.criterion(7, "determinacy, recursion bracket, front tracking and linear speed agree")
def test_cross_method(record_property):
    grid = Grid(10.0, 128)
    hab = equal_competition(grid)
    k = Gaussian(0.1)
    verdict = determinacy_verdict(hab, k, k, grid)
    c0 = verdict.c0.c

    pr = load_config(CONFIGS / "equal_competition.toml")
    dyn = Dynamics(pr.habitat, pr.k1, pr.k2, pr.grid, "invasion")
    c_hat = track_front(dyn.simulate(dyn.initial_state(), 200)).speed

    coarse = Grid(10.0, 64)
    system = RecursionSystem.cooperative(equal_competition(coarse), k, k, coarse)
    br = recursion_bracket(system, 0.2, 0.4)
    c_bar = 0.5 * sum(br.upper)

    values = {"c0": c0, "c_hat": c_hat, "c_bar": c_bar}
    gaps = {f"{a}/{b}": abs(values[a] - values[b]) / min(values[a], values[b])
            for a, b in (("c0", "c_hat"), ("c0", "c_bar"), ("c_hat", "c_bar"))}
    detail(record_property, ", ".join(f"{k_}={v:.4f}" for k_, v in values.items())
           + f"; bracket {br.upper[0]:.4f}..{br.upper[1]:.4f}; D1={verdict.d1_margin:.3f} "
           f"D2={verdict.d2_margin:.3f}; worst gap {100 * max(gaps.values()):.2f}%")
    assert verdict.linearly_determinate
    assert verdict.d1_margin > 0 and verdict.d2_margin > 0
    assert max(gaps.values()) <= 0.05
    assert br.lower[1] >= c0 - 1e-2


@pytest.mark.criterion(8, "two-patch experiments: p advances, q retreats, M fails")
def test_figures(record_property, tmp_path, capsys):
    notes = []
    for fig in ("fig1", "fig2"):
        out = tmp_path / fig
        assert dispatch(["reproduce", fig, "--out", str(out)]) == 0
        for n in (2, 4, 6, 8):
            assert (out / f"snapshot_{n}.csv").exists()
        s = json.loads((out / "summary.json").read_text())
        rows = {r["n"]: r for r in s["snapshots"]}
        assert rows[8]["x_front"] > rows[2]["x_front"]
        assert s["front_monotone"]
        assert rows[8]["q_behind"] < 0.1 * s["max_q_star"]
        assert s["q_recedes"]
        m = s["hypotheses"]["checks"]["M"]
        assert m["verdict"] == "fails" and "C_M/C_m = 2 is not < min a2 = 1.5" in m["detail"]
        notes.append(f"{fig}: front {rows[2]['x_front']:.2f}->{rows[8]['x_front']:.2f}, "
                     f"q behind {rows[8]['q_behind'] / s['max_q_star']:.3f} max q*")
    capsys.readouterr()
    detail(record_property, "; ".join(notes))


@pytest.mark.criterion(9, "order preservation and transform round trip")
def test_monotone_system(record_property):
    pr = load_config(CONFIGS / "patchy_laplace.toml")
    grid = Grid(10.0, 64, 16)
    hab = two_patch_habitat(grid)
    dyn = Dynamics(hab, pr.k1, pr.k2, grid, "invasion")
    ps, qs = grid.tile(dyn.p_star), grid.tile(dyn.q_star)
    rng = np.random.default_rng(9)
    order = 0.0
    for _ in range(10):
        u = rng.uniform(0, 1, dyn.size) * ps
        v = rng.uniform(0, 1, dyn.size) * qs
        U = u + rng.uniform(0, 1, dyn.size) * (ps - u)
        V = v + rng.uniform(0, 1, dyn.size) * (qs - v)
        for _ in range(50):
            u, v = dyn.step_cooperative(u, v)
            U, V = dyn.step_cooperative(U, V)
            order = max(order, float(np.max(u - U)), float(np.max(v - V)))
    s = dyn.initial_state()
    u, v = dyn.to_cooperative(s.p, s.q)
    trip = 0.0
    for _ in range(50):
        s = dyn.step(s)
        u, v = dyn.step_cooperative(u, v)
        p, q = dyn.from_cooperative(u, v)
        trip = max(trip, float(np.max(np.abs(p - s.p))), float(np.max(np.abs(q - s.q))))
    detail(record_property, f"order defect {order:.1e}, round trip {trip:.1e}")
    assert order <= 1e-12
    assert trip <= 1e-10


@pytest.mark.criterion(10, "upper solution on the equal-competition instance")
def test_upper_solution(record_property):
    grid = Grid(10.0, 128)
    hab = equal_competition(grid)
    k = Gaussian(0.1)
    pair = determinacy_verdict(hab, k, k, grid).pair
    rep = verify_upper_solution(hab, k, k, grid, pair, steps=6)
    detail(record_property, f"min slack {rep.min_slack:.2e} over n=0..5, "
                            f"{rep.invalid_points} invalid points")
    assert rep.min_slack >= -1e-10
    assert rep.invalid_points == 0

from __future__ import annotations

import math

import numpy as np
import pytest

from idefront.eigen import LEFTWARD, RIGHTWARD, assemble, dense_eigen
from idefront.errors import NoSpeedError, ValidationError
from idefront.habitat import Grid, Habitat, PeriodicField
from idefront.kernel import Gaussian, Laplace
from idefront.speeds import (BETA_LIMIT, ZERO_LIMIT, RecursionSystem,
                             check_hypotheses, d2_margin, determinacy_verdict, golden_section,
                             linearized_multipliers, linearized_pair, recursion_bracket,
                             recursion_classify, spreading_speed, upper_constants,
                             verify_upper_solution)
from idefront.speeds.hypotheses import FAILS, HOLDS, MARGINAL, MARGINAL_BAND, ORDER
from idefront.speeds.recursion import default_threads
from idefront.steady import semi_trivial_states

from conftest import E, equal_competition, two_patch_habitat

GRID = Grid(10.0, 128)
ONE_E = PeriodicField.constant(E, GRID)


def laplace_oracle(b=0.5, samples=100_000):
    # independent brute-force scan of the closed-form ratio on (0, 1/b)
    mu = np.linspace(0, 1 / b, samples + 2)[1:-1]
    g = (1.0 - np.log(1.0 - (b * mu) ** 2)) / mu
    i = int(np.argmin(g))
    return g[i], mu[i]


def test_gaussian_closed_form():
    rep = spreading_speed(ONE_E, Gaussian(0.1), GRID)
    assert rep.c == pytest.approx(math.sqrt(0.2), abs=1e-6)
    assert rep.mu0 == pytest.approx(math.sqrt(20.0), abs=1e-4)


def test_laplace_matches_brute_force():
    c_ref, mu_ref = laplace_oracle()
    rep = spreading_speed(ONE_E, Laplace(0.5), GRID)
    assert rep.c == pytest.approx(c_ref, rel=1e-5)
    assert rep.mu0 == pytest.approx(mu_ref, abs=1e-3)
    assert rep.c == pytest.approx(1.191, abs=1e-3)


@pytest.mark.parametrize("k", [Gaussian(0.1), Laplace(0.5)])
def test_directions_agree_for_symmetric_kernels(k):
    right = spreading_speed(ONE_E, k, GRID, RIGHTWARD).c
    left = spreading_speed(ONE_E, k, GRID, LEFTWARD).c
    assert right == pytest.approx(left, rel=1e-8)


def test_no_speed_when_not_persisting():
    with pytest.raises(NoSpeedError):
        spreading_speed(PeriodicField.constant(0.9, GRID), Gaussian(0.1), GRID)


def test_golden_section_on_parabola():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2 + 1.0, -2.0, 3.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-6) and fx == pytest.approx(1.0, abs=1e-12)


# -- linear determinacy ------------------------------------------------------

def test_linearized_pair_on_equal_competition(prop_instance):
    hab, k1, k2, grid = prop_instance
    v = determinacy_verdict(hab, k1, k2, grid)
    pair = v.pair
    assert v.linearly_determinate
    assert v.d1_margin > 0 and v.d2_margin > 0
    phi1, phi2 = pair.phi1.values, pair.phi2.values
    assert np.ptp(phi1) < 1e-9 and np.ptp(phi2) < 1e-9
    assert np.min(phi1 / phi2) >= 1.0
    assert pair.residual <= 1e-9
    # lambda_bar from a dense decomposition of the v-block
    q = semi_trivial_states(hab, k1, k2, grid)[1].values
    mult = linearized_multipliers(hab, q, grid)
    lam_dense, _ = dense_eigen(assemble(mult["v"], k2, grid, pair.mu0))
    assert pair.lambda_bar == pytest.approx(lam_dense, rel=1e-8)
    assert pair.lambda_bar == pytest.approx(math.exp(-1) * k2.mgf(pair.mu0), rel=1e-8)


def test_multipliers_closed_form(prop_instance):
    hab, k1, k2, grid = prop_instance
    q = np.full(grid.n, 0.5)
    m = linearized_multipliers(hab, q, grid)
    b1, b2 = E - 1, 2 * (E - 1)
    np.testing.assert_allclose(m["u"].values, E / (1 + b1 * 0.5))
    np.testing.assert_allclose(m["v"].values, E / (1 + b2 * 0.5) ** 2)
    np.testing.assert_allclose(m["resident"].values, E / (1 + b2 * 0.5))


def test_upper_solution_slack(prop_instance):
    hab, k1, k2, grid = prop_instance
    pair = determinacy_verdict(hab, k1, k2, grid).pair
    h1, h2 = upper_constants(hab, pair, semi_trivial_states(hab, k1, k2, grid)[1].values)
    assert 0 < h1 and 0 < h2
    base = verify_upper_solution(hab, k1, k2, grid, pair)
    doubled = verify_upper_solution(hab, k1, k2, grid, pair, amplitude=2 * base.amplitude)
    assert base.holds and doubled.holds
    assert base.min_slack >= -1e-10 and base.invalid_points == 0


def test_strong_first_competitor_breaks_upper_solution(grid128):
    hab = Habitat.constant(grid128, E, E, 1.0, 0.5, 1.5, 1.0)
    k = Gaussian(0.1)
    v = determinacy_verdict(hab, k, k, grid128)
    assert v.d2_margin < 0 and not v.linearly_determinate
    rep = verify_upper_solution(hab, k, k, grid128, v.pair)
    assert rep.min_slack < 0


def test_d2_margin_pointwise():
    grid = Grid(10.0, 16)
    hab = Habitat.constant(grid, E, E, 1.0, 0.5, 0.5, 4.0)
    assert d2_margin(hab, np.full(16, 2.0), np.ones(16)) == pytest.approx(2.0 - 0.5)


# -- hypotheses ------------------------------------------------------------

def test_equal_competition_all_but_m_hold(prop_instance):
    rep = check_hypotheses(*prop_instance)
    assert list(rep.checks) == list(ORDER)
    for name in ("H1", "H2", "H3", "H4", "H5", "D1", "D2"):
        assert rep[name].verdict == HOLDS, (name, rep[name])
    assert rep["H1"].margin == pytest.approx(E - 1, rel=1e-10)


def test_patchy_instance_reports_m_failure(fig1_problem):
    pr = fig1_problem
    rep = check_hypotheses(pr.habitat, pr.k1, pr.k2, pr.grid)
    m = rep["M"]
    assert m.verdict == FAILS
    assert "max a1 = 0.4 < C_m/C_M = 0.5" in m.detail
    assert "C_M/C_m = 2 is not < min a2 = 1.5" in m.detail
    assert rep["H1"].margin == pytest.approx(E - 1, rel=1e-8)
    assert rep.to_dict()["checks"]["M"]["verdict"] == FAILS


def test_symmetric_competitors_coexist():
    grid = Grid(10.0, 64)
    hab = Habitat.constant(grid, E, E, 1.0, 1.0, 1.0, 1.0)
    rep = check_hypotheses(hab, Gaussian(0.1), Gaussian(0.1), grid, h3_steps=2000)
    assert rep["H3"].verdict == FAILS
    assert "interior state found" in rep["H3"].detail
    for c in rep.checks.values():
        assert math.isfinite(c.margin)
        if c.verdict == MARGINAL:
            assert abs(c.margin) < MARGINAL_BAND


# -- recursion -------------------------------------------------------------

@pytest.fixture(scope="module")
def scalar_system():
    grid = Grid(10.0, 64)
    one = PeriodicField.constant(E, grid)
    return RecursionSystem.scalar(one, PeriodicField.constant(1.0, grid), Gaussian(0.1), grid)


def test_far_supercritical_speed_dies_out(scalar_system):
    assert recursion_classify(10.0, scalar_system).outcome == ZERO_LIMIT


def test_slow_frame_fills_up(scalar_system):
    assert recursion_classify(0.2, scalar_system).outcome == BETA_LIMIT


def test_bracket_rejects_wrong_ends(scalar_system):
    with pytest.raises(ValidationError):
        recursion_bracket(scalar_system, 10.0, 20.0)


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("IDEFRONT_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("IDEFRONT_THREADS", "zero")
    with pytest.raises(ValidationError):
        default_threads()


@pytest.mark.slow
def test_scalar_bracket_contains_closed_form(scalar_system):
    br = recursion_bracket(scalar_system, 0.2, 0.7)
    c = math.sqrt(0.2)
    assert br.lower[0] - 0.01 <= c <= br.lower[1] + 0.01
    assert br.upper[0] - 0.01 <= c <= br.upper[1] + 0.01
    assert br.lower[1] - br.lower[0] <= 0.01 + 1e-12

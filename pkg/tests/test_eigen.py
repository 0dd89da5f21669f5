from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idefront.eigen import (LEFTWARD, RIGHTWARD, assemble, assemble_dense, dense_eigen,
                            eigenvalue, growth_rate_ratio, is_irreducible, lambda_curve,
                            principal_eigen)
from idefront.errors import DomainError, ValidationError
from idefront.habitat import Grid, PeriodicField, piecewise_two_patch
from idefront.kernel import Gaussian, Laplace, Table
from idefront.steady import persistence_eigenvalue, semi_trivial_states
from idefront.speeds import linearized_multipliers

from conftest import E, two_patch_habitat

GRID = Grid(10.0, 64)


@pytest.mark.parametrize("k", [Gaussian(0.1), Gaussian(1.0), Laplace(0.5)])
@pytest.mark.parametrize("mu", [0.0, 0.7, 1.5])
def test_constant_multiplier_closed_form(k, mu):
    r = 2.3
    lam = eigenvalue(PeriodicField.constant(r, GRID), k, GRID, mu).lam
    assert lam == pytest.approx(r * k.mgf(mu), rel=1e-8)


def test_named_constant_values():
    assert eigenvalue(PeriodicField.constant(2.0, GRID), Gaussian(1.0), GRID, 1.0).lam == \
        pytest.approx(2 * math.exp(0.5), rel=1e-8)
    res = eigenvalue(PeriodicField.constant(1.0, GRID), Gaussian(0.1), GRID, 0.0)
    assert res.lam == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(res.vector, 1.0, atol=1e-12)
    assert persistence_eigenvalue(PeriodicField.constant(E, GRID), Gaussian(0.1), GRID) == \
        pytest.approx(E, rel=1e-12)
    eps = persistence_eigenvalue(PeriodicField.constant(1 + 1e-6, GRID), Laplace(0.5), GRID)
    assert eps == pytest.approx(1 + 1e-6, rel=1e-12)


def test_table_kernel_matches_dense_oracle():
    z = np.linspace(-1.5, 1.5, 61)
    k = Table(z, (1.5 - np.abs(z)) / 1.5**2)
    m = piecewise_two_patch(GRID.L, 5.0, 2.0, 0.5, GRID)
    for mu in (0.0, 0.8):
        op = assemble(m, k, GRID, mu)
        lam_dense, vec = dense_eigen(op)
        res = principal_eigen(op)
        assert res.lam == pytest.approx(lam_dense, rel=1e-8)
        np.testing.assert_allclose(res.vector, vec, atol=1e-7)


def test_point_rule_against_general_kernel():
    # a translation-invariant k(x, y) through the general assembly path
    k = Gaussian(0.5)
    m = piecewise_two_patch(GRID.L, 3.0, 1.5, 0.7, GRID)
    ref = principal_eigen(assemble(m, k, GRID, 0.4, rule="point")).lam
    op = assemble_dense(lambda x, y: k.density(x - y), m, GRID, 0.4)
    assert principal_eigen(op).lam == pytest.approx(ref, rel=1e-10)


def test_invasion_multiplier_persists(fig1_problem):
    pr = fig1_problem
    grid = pr.grid
    q = semi_trivial_states(pr.habitat, pr.k1, pr.k2, grid)[1].values
    m = linearized_multipliers(pr.habitat, q, grid)["u"]
    assert eigenvalue(m, pr.k1, grid, 0.0).lam > 1.0


def test_curve_matches_closed_form():
    k, r = Gaussian(0.3), 1.8
    pts = lambda_curve(PeriodicField.constant(r, GRID), k, GRID, 0.1, 2.0, 8)
    for p in pts:
        assert p.lam == pytest.approx(r * k.mgf(p.mu), rel=1e-8)
        assert p.g == pytest.approx((math.log(r) + math.log(k.mgf(p.mu))) / p.mu, rel=1e-8)


def test_ratio_blows_up_near_zero(fig1_problem):
    pr = fig1_problem
    grid = Grid(10.0, 64)
    m = piecewise_two_patch(10.0, 5.5, E, E, grid)
    small = growth_rate_ratio(eigenvalue(m, pr.k1, grid, 1e-3).lam, 1e-3)
    mid = growth_rate_ratio(eigenvalue(m, pr.k1, grid, 0.5).lam, 0.5)
    assert small > mid
    assert growth_rate_ratio(2.0, 0.0) == math.inf


def test_domain_and_validation_errors():
    with pytest.raises(DomainError):
        assemble(PeriodicField.constant(2.0, GRID), Laplace(0.5), GRID, 2.0)
    with pytest.raises(ValidationError):
        assemble(PeriodicField(np.r_[np.ones(63), 0.0], 10.0), Gaussian(0.1), GRID, 0.0)
    with pytest.raises(ValidationError):
        assemble(PeriodicField.constant(2.0, Grid(10.0, 32)), Gaussian(0.1), GRID, 0.0)


def test_operator_is_irreducible():
    assert is_irreducible(assemble(PeriodicField.constant(2.0, GRID), Gaussian(0.1), GRID, 0.0))


def _random_m(seed):
    rng = np.random.default_rng(seed)
    lo, hi = rng.uniform(0.2, 3.0, 2)
    return piecewise_two_patch(GRID.L, rng.uniform(1.0, 9.0), lo, hi, GRID)


@given(st.integers(0, 10_000), st.floats(0.05, 1.0), st.floats(0.0, 1.9))
def test_monotone_in_multiplier(seed, bump, mu):
    m = _random_m(seed)
    bigger = PeriodicField(m.values * (1 + bump), m.L)
    k = Laplace(0.5)
    assert eigenvalue(bigger, k, GRID, mu).lam > eigenvalue(m, k, GRID, mu).lam


@given(st.integers(0, 10_000), st.floats(0.1, 1.5))
def test_log_lambda_is_convex(seed, top):
    m = _random_m(seed)
    mus = np.linspace(-top, top, 9)
    ln = np.array([math.log(eigenvalue(m, Laplace(0.5), GRID, float(u)).lam) for u in mus])
    assert np.min(ln[2:] - 2 * ln[1:-1] + ln[:-2]) >= -1e-8


@given(st.integers(0, 10_000), st.floats(0.0, 1.9))
def test_symmetric_kernel_is_even_in_mu(seed, mu):
    m = _random_m(seed)
    k = Laplace(0.5)
    right = eigenvalue(m, k, GRID, mu, RIGHTWARD).lam
    left = eigenvalue(m, k, GRID, -mu, RIGHTWARD).lam
    assert right == pytest.approx(left, rel=1e-8)
    assert eigenvalue(m, k, GRID, mu, LEFTWARD).lam == pytest.approx(right, rel=1e-8)

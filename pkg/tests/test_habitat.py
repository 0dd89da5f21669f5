from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idefront.errors import ParseError, RangeError, SchemaError, ValidationError
from idefront.habitat import Grid, Habitat, PeriodicField, load_config, piecewise_two_patch

from conftest import CONFIGS

BASE = """
[grid]
L = 10.0
n = 64

[habitat]
r1 = 2.718281828459045
r2 = 2.718281828459045
C1 = 1.0
C2 = 0.5
a1 = 1.0
a2 = 1.0

[kernel.k1]
family = "gaussian"
variance = 0.1

[kernel.k2]
family = "gaussian"
variance = 0.1
"""


def write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    return p


def test_two_patch_field():
    grid = Grid(10.0, 128)
    C = piecewise_two_patch(10.0, 5.5, 1.0, 0.5, grid)
    assert np.all(C.values[grid.x < 5.5] == 1.0) and np.all(C.values[grid.x >= 5.5] == 0.5)
    c = piecewise_two_patch(10.0, 5.0, 0.7, 0.7, grid)
    assert c.is_constant and c.min() == 0.7


def test_breakpoint_outside_period():
    with pytest.raises(RangeError):
        piecewise_two_patch(10.0, 10.0, 1.0, 0.5, Grid(10.0, 64))


@pytest.mark.parametrize("kw", [dict(L=-1.0, n=64), dict(L=10.0, n=8), dict(L=10.0, n=64, sim_periods=5)])
def test_grid_validation(kw):
    with pytest.raises(RangeError):
        Grid(**kw)


def test_field_csv_round_trip(tmp_path):
    grid = Grid(10.0, 64)
    f = PeriodicField(np.linspace(1, 2, 64), 10.0)
    f.to_csv(tmp_path / "f.csv")
    g = PeriodicField.from_csv(tmp_path / "f.csv", 10.0)
    np.testing.assert_array_equal(f.values, g.values)
    (tmp_path / "bad.csv").write_text("x,y\n0,1\n")
    with pytest.raises(SchemaError):
        PeriodicField.from_csv(tmp_path / "bad.csv", 10.0)


def test_habitat_rejects_r_below_one():
    grid = Grid(10.0, 64)
    with pytest.raises(ValidationError):
        Habitat.constant(grid, 0.9, math.e, 1.0, 0.5, 1.0, 1.0)


def test_load_minimal(tmp_path):
    pr = load_config(write(tmp_path, BASE))
    assert pr.grid.n == 64 and pr.habitat.C2.max() == 0.5
    assert pr.run.steps >= 1


def test_presets_load():
    pr = load_config(CONFIGS / "patchy_laplace.toml")
    h = pr.habitat
    assert h.r1.min() == pytest.approx(math.e) and h.r2.max() == pytest.approx(math.e)
    assert (h.C1.max(), h.C1.min()) == (1.0, 0.5)
    assert (h.a1.max(), h.a2.min()) == (0.4, 1.5)
    for name in ("patchy_mixed", "equal_competition", "single_species"):
        load_config(CONFIGS / f"{name}.toml")


def test_config_errors(tmp_path):
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, BASE.replace("r1 = 2.718281828459045", "r1 = 0.9")))
    with pytest.raises(ParseError):
        load_config(write(tmp_path, BASE.split("[kernel.k1]")[0]))
    with pytest.raises(ParseError, match="line"):
        load_config(write(tmp_path, BASE + "\n[grid\n"))
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.toml")
    with pytest.raises(ParseError):
        load_config(write(tmp_path, BASE + "\n[run]\nbogus = 1\n"))


@given(st.lists(st.floats(0.0, 5.0), min_size=16, max_size=16), st.floats(-1e3, 1e3), st.integers(-5, 5))
def test_field_is_periodic(vals, x, k):
    f = PeriodicField(np.array(vals), 10.0)
    slope = max(np.ptp(vals), 1.0) / f.h
    assert f(x + k * 10.0) == pytest.approx(f(x), abs=1e-12 * slope * (abs(x) + 100.0))


def test_field_interpolates_nodes():
    grid = Grid(L=10.0, n=64)
    f = PeriodicField(np.sin(2 * np.pi * grid.x / 10.0), 10.0)
    assert np.allclose(f(grid.x), f.values, atol=1e-15, rtol=0)

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from idefront import _backend
from idefront.habitat import Grid, Habitat, PeriodicField, load_config, piecewise_two_patch
from idefront.kernel import Gaussian

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
E = math.e


@pytest.fixture(params=sorted(_backend.AVAILABLE))
def backend(request):
    """Run a test once per available backend, restoring the default afterwards."""
    before = _backend.BACKEND
    _backend.use(request.param)
    yield request.param
    _backend.use(before)


@pytest.fixture
def grid64():
    return Grid(10.0, 64)


@pytest.fixture
def grid128():
    return Grid(10.0, 128)


def two_patch_habitat(grid: Grid, C=(1.0, 0.5), a1=(0.3, 0.4), a2=(2.0, 1.5), r=E, L1=5.5) -> Habitat:
    f = lambda v: piecewise_two_patch(grid.L, L1, v[0], v[1], grid)
    return Habitat(PeriodicField.constant(r, grid), PeriodicField.constant(r, grid),
                   f(C), f(C), f(a1), f(a2))


def equal_competition(grid: Grid) -> Habitat:
    return Habitat.constant(grid, E, E, 1.0, 0.5, 1.0, 1.0)


@pytest.fixture
def prop_instance(grid128):
    return equal_competition(grid128), Gaussian(0.1), Gaussian(0.1), grid128


@pytest.fixture
def fig1_problem():
    return load_config(CONFIGS / "patchy_laplace.toml")


def random_two_patch_m(rng: np.random.Generator, grid: Grid) -> PeriodicField:
    lo, hi = rng.uniform(0.2, 3.0, 2)
    L1 = rng.uniform(0.1, 0.9) * grid.L
    return piecewise_two_patch(grid.L, L1, lo, hi, grid)


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))

"""Numerical checks of the standing hypotheses behind the speed theory.

Every check yields a verdict and a finite margin whose sign carries the
verdict: positive means the condition holds, negative means it fails, and
anything within 1e-8 of zero is reported as marginal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _backend
from ..eigen import LEFTWARD, RIGHTWARD, assemble, eigenvalue
from ..errors import IdefrontError
from ..habitat import Grid, Habitat, PeriodicField
from ..kernel import Kernel
from ..steady import persistence_eigenvalue, semi_trivial_states
from .determinacy import determinacy_verdict, linearized_multipliers
from .minimize import spreading_speed

HOLDS = "holds"
FAILS = "fails"
MARGINAL = "marginal"
MARGINAL_BAND = 1e-8

ORDER = ("H1", "H2", "H3", "H4", "H5", "M", "D1", "D2")
SMALL_MU = (1e-1, 1e-2, 1e-3)
BOUNDARY_TOL = 1e-6
# smallest distance reported by the coexistence search, keeps the margin finite
_DIST_FLOOR = 1e-300
# a seed that moves less than this per step has settled
_SETTLED = 1e-14


@dataclass(frozen=True)
class Check:
    verdict: str
    margin: float
    detail: str

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "margin": self.margin, "detail": self.detail}


def _check(margin: float, detail: str) -> Check:
    if abs(margin) < MARGINAL_BAND:
        verdict = MARGINAL
    else:
        verdict = HOLDS if margin > 0 else FAILS
    return Check(verdict, float(margin), detail)


@dataclass(frozen=True, eq=False)
class HypothesisReport:
    """Verdicts keyed by hypothesis name, in the order of ``ORDER``."""

    checks: dict[str, Check]
    values: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Check:
        return self.checks[name]

    @property
    def all_hold(self) -> bool:
        return all(c.verdict == HOLDS for c in self.checks.values())

    def failing(self) -> list[str]:
        return [k for k, c in self.checks.items() if c.verdict != HOLDS]

    def to_dict(self) -> dict:
        return {"checks": {k: c.to_dict() for k, c in self.checks.items()},
                "values": dict(self.values), "all_hold": self.all_hold}


def small_mu_limit(m: PeriodicField, k: Kernel, grid: Grid, direction: str = LEFTWARD,
                   mus: tuple[float, ...] = SMALL_MU) -> tuple[float, list[float]]:
    """Extrapolate ln(lambda(mu))/mu to mu = 0 from a few small mu.

    The samples are fit by the interpolating polynomial in mu, which is then
    evaluated at 0.

    Returns:
        (limit, samples).
    """
    xs = np.asarray(mus, dtype=float)
    ys = np.array([math.log(eigenvalue(m, k, grid, float(mu), direction).lam) / mu for mu in xs])
    coeffs = np.polyfit(xs, ys, len(xs) - 1)
    return float(np.polyval(coeffs, 0.0)), ys.tolist()


def coexistence_search(habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid,
                       seeds: int = 32, steps: int = 5000, rng_seed: int = 0) -> tuple[float, int]:
    """Iterate the competitive map on one period from random interior states.

    All seeds advance together as one batch. Iteration stops early once every
    seed is within ``BOUNDARY_TOL`` of a boundary state, or has stopped moving.

    Returns:
        (d, steps_taken), where d is the largest, over seeds, of
        min(sup p, sup q) at the end.
    """
    rng = np.random.default_rng(rng_seed)
    ones = PeriodicField.constant(1.0, grid)
    K1 = assemble(ones, k1, grid, 0.0).matrix
    K2 = assemble(ones, k2, grid, 0.0).matrix
    C1, C2 = habitat.C1.values, habitat.C2.values
    p = rng.uniform(0.05, 1.0, (seeds, grid.n)) * C1
    q = rng.uniform(0.05, 1.0, (seeds, grid.n)) * C2
    h = habitat
    coef = (h.r1.values, h.b1.values, h.a1.values, h.r2.values, h.b2.values, h.a2.values)
    taken = 0
    for taken in range(1, steps + 1):
        g1, g2 = _backend.impl.growth_competitive(p.ravel(), q.ravel(),
                                                  *(np.tile(c, seeds) for c in coef))
        p_new = g1.reshape(seeds, grid.n) @ K1.T
        q_new = g2.reshape(seeds, grid.n) @ K2.T
        move = max(float(np.max(np.abs(p_new - p))), float(np.max(np.abs(q_new - q))))
        p, q = p_new, q_new
        d = np.minimum(p.max(axis=1), q.max(axis=1))
        if float(d.max()) < BOUNDARY_TOL * 1e-6 or move < _SETTLED:
            break
    d = np.minimum(p.max(axis=1), q.max(axis=1))
    return float(d.max()), taken


def check_hypotheses(habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid,
                     seeds: int = 32, h3_steps: int = 5000, rng_seed: int = 0) -> HypothesisReport:
    """Evaluate H1-H5, M, D1 and D2 for one habitat and kernel pair.

    Margins:
        H1: min(lambda_1 - 1, lambda_2 - 1) for each species alone.
        H2: lambda - 1 for r1 / (1 + b1 a1 q*) at mu = 0.
        H3: -log10(d) - 6, d being the largest min(sup p, sup q) left by the
            coexistence search; positive when every seed reached a boundary
            state within 1e-6. This can refute but never prove the hypothesis.
        H4: c1+ + c2-, species 1 alone rightward plus species 2 alone leftward.
        H5: c1+ minus the small-mu limit of ln(lambda_2(mu))/mu, lambda_2
            taken from r2 / (1 + b2 q*) with leftward weight.
        M: the smaller of C_m/C_M - max a1 and min a2 - C_M/C_m, with C_M and
            C_m the extremes of both capacity fields.
        D1, D2: as reported by ``determinacy_verdict``.

    A check whose computation raises reports ``fails`` with margin -1 and
    the error in its detail.
    """
    checks: dict[str, Check] = {}
    values: dict[str, float] = {}
    p_star, q_star = semi_trivial_states(habitat, k1, k2, grid)
    qs = q_star.values
    mult = linearized_multipliers(habitat, qs, grid)

    lam1 = persistence_eigenvalue(habitat.r1, k1, grid)
    lam2 = persistence_eigenvalue(habitat.r2, k2, grid)
    values.update(lambda1=lam1, lambda2=lam2)
    checks["H1"] = _check(min(lam1, lam2) - 1.0,
                          f"persistence eigenvalues {lam1:.10g} (species 1), {lam2:.10g} (species 2)")

    lam_inv = eigenvalue(mult["u"], k1, grid, 0.0).lam
    values["lambda_invasion"] = lam_inv
    checks["H2"] = _check(lam_inv - 1.0, f"species 1 invading q*: lambda = {lam_inv:.10g}")

    d, taken = coexistence_search(habitat, k1, k2, grid, seeds, h3_steps, rng_seed)
    values["coexistence_distance"] = d
    if -math.log10(max(d, _DIST_FLOOR)) - 6.0 > 0:
        msg = f"no interior attractor found from {seeds} random seeds ({taken} steps)"
    else:
        msg = (f"interior state found: min(sup p, sup q) = {d:.3g} after {taken} steps "
               f"from {seeds} random seeds")
    checks["H3"] = _check(-math.log10(max(d, _DIST_FLOOR)) - 6.0, msg)

    c1 = None
    try:
        c1 = spreading_speed(habitat.r1, k1, grid, RIGHTWARD).c
        c2 = spreading_speed(habitat.r2, k2, grid, LEFTWARD).c
        values.update(c1_right=c1, c2_left=c2)
        checks["H4"] = _check(c1 + c2, f"c1+ = {c1:.10g}, c2- = {c2:.10g}")
    except IdefrontError as exc:
        checks["H4"] = Check(FAILS, -1.0, str(exc))

    try:
        if c1 is None:
            raise IdefrontError("c1+ is unavailable")
        limit, samples = small_mu_limit(mult["resident"], k2, grid)
        values["h5_limit"] = limit
        checks["H5"] = _check(c1 - limit, f"small-mu limit {limit:.3g} "
                              f"(samples {', '.join(f'{s:.3g}' for s in samples)}) vs c1+ = {c1:.10g}")
    except IdefrontError as exc:
        checks["H5"] = Check(FAILS, -1.0, str(exc))

    cs = np.concatenate([habitat.C1.values, habitat.C2.values])
    C_M, C_m = float(cs.max()), float(cs.min())
    a1_M, a2_m = habitat.a1.max(), habitat.a2.min()
    m1 = C_m / C_M - a1_M
    m2 = a2_m - C_M / C_m
    values.update(M_first=m1, M_second=m2)
    parts = [f"max a1 = {a1_M:g} {'<' if m1 > 0 else 'is not <'} C_m/C_M = {C_m / C_M:g}",
             f"C_M/C_m = {C_M / C_m:g} {'<' if m2 > 0 else 'is not <'} min a2 = {a2_m:g}"]
    checks["M"] = _check(min(m1, m2), "; ".join(parts))

    try:
        v = determinacy_verdict(habitat, k1, k2, grid, qs)
        values.update(c0=v.c0.c, mu0=v.c0.mu0)
        checks["D1"] = _check(v.d1_margin, f"lambda0 - lambda_bar at mu0 = {v.c0.mu0:.10g}")
        checks["D2"] = _check(v.d2_margin, v.note or "min phi1/phi2 - max(a1, 1/a2)")
    except IdefrontError as exc:
        checks["D1"] = Check(FAILS, -1.0, str(exc))
        checks["D2"] = Check(FAILS, -1.0, str(exc))
    return HypothesisReport({k: checks[k] for k in ORDER}, values)

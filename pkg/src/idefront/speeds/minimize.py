"""Spreading speeds as minima of ln(lambda(mu))/mu."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..eigen import RIGHTWARD, eigenvalue
from ..errors import NoSpeedError, UnboundedError
from ..habitat import Grid, PeriodicField
from ..kernel import Kernel

COARSE_SAMPLES = 64
MU_TOL = 1e-8
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_DOUBLINGS = 40


@dataclass(frozen=True, eq=False)
class SpeedReport:
    """Minimum of g(mu) = ln(lambda(mu))/mu and how it was found.

    ``curve`` holds every evaluated ``(mu, g)`` pair sorted by ``mu``.
    """

    c: float
    mu0: float
    lambda_mu0: float
    curve: list[tuple[float, float]]
    method: str
    direction: str = RIGHTWARD
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {"c": self.c, "mu0": self.mu0, "lambda_mu0": self.lambda_mu0,
                "method": self.method, "direction": self.direction,
                "evaluations": self.evaluations}


class _Objective:
    """Caches eigen solves and reuses the nearest eigenvector as a warm start."""

    def __init__(self, m: PeriodicField, k: Kernel, grid: Grid, direction: str):
        self.m, self.k, self.grid, self.direction = m, k, grid, direction
        self.cache: dict[float, tuple[float, np.ndarray]] = {}

    def lam(self, mu: float) -> float:
        if mu in self.cache:
            return self.cache[mu][0]
        phi0 = None
        if self.cache:
            near = min(self.cache, key=lambda s: abs(s - mu))
            phi0 = self.cache[near][1]
        res = eigenvalue(self.m, self.k, self.grid, mu, self.direction, phi0)
        self.cache[mu] = (res.lam, res.vector)
        return res.lam

    def __call__(self, mu: float) -> float:
        return math.log(self.lam(mu)) / mu

    def curve(self) -> list[tuple[float, float]]:
        return [(mu, math.log(v[0]) / mu) for mu, v in sorted(self.cache.items()) if mu > 0]


def golden_section(f, a: float, b: float, tol: float = MU_TOL) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]`` until the bracket is shorter than ``tol``.

    Returns:
        (argmin, min) among the evaluated interior points.
    """
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def spreading_speed(m: PeriodicField, k: Kernel, grid: Grid,
                    direction: str = RIGHTWARD, samples: int = COARSE_SAMPLES,
                    tol: float = MU_TOL) -> SpeedReport:
    """inf over mu > 0 of ln(lambda(mu))/mu for multiplier ``m`` and kernel ``k``.

    A log-spaced coarse scan locates the minimum, then golden-section search
    refines the bracketing triple to ``|d mu| < tol``.

    Raises:
        NoSpeedError: lambda(0) <= 1.
        UnboundedError: g still decreases at 0.999 of the abscissa.
    """
    obj = _Objective(m, k, grid, direction)
    lam0 = eigenvalue(m, k, grid, 0.0, direction).lam
    if lam0 <= 1.0:
        raise NoSpeedError(f"lambda(0) = {lam0:.12g} <= 1: no positive spreading speed")
    if math.isfinite(k.abscissa):
        mu_hi = 0.999 * k.abscissa
    else:
        mu_hi = 1.0
        for _ in range(_MAX_DOUBLINGS):
            if obj(2 * mu_hi) > obj(mu_hi):
                mu_hi *= 2
                break
            mu_hi *= 2
        else:
            raise UnboundedError("ln(lambda)/mu kept decreasing while mu grew without bound")
    mus = np.geomspace(mu_hi * 1e-4, mu_hi, samples)
    g = np.array([obj(float(mu)) for mu in mus])
    i = int(np.argmin(g))
    if i == samples - 1:
        if math.isfinite(k.abscissa):
            raise UnboundedError(
                f"ln(lambda)/mu is still decreasing at 0.999 x abscissa ({mu_hi:.6g}); "
                "the infimum sits at the abscissa of convergence")
        i -= 1
    lo = float(mus[max(i - 1, 0)]) if i > 0 else float(mus[0]) * 0.1
    hi = float(mus[min(i + 1, samples - 1)])
    mu0, c = golden_section(obj, lo, hi, tol)
    best = min(obj.cache.items(), key=lambda kv: math.log(kv[1][0]) / kv[0] if kv[0] > 0 else math.inf)
    if math.log(best[1][0]) / best[0] < c:
        mu0, c = best[0], math.log(best[1][0]) / best[0]
    return SpeedReport(float(c), float(mu0), obj.lam(mu0), obj.curve(), "golden_section",
                       direction, len(obj.cache) + 1)

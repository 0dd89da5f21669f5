"""Weighted periodic principal-eigenvalue problems.

The operator acting on L-periodic functions is

    (A phi)(x) = integral k(x - y) exp(s (x - y)) m(y) phi(y) dy,

with ``s = mu`` for rightward problems and ``s = -mu`` for leftward ones.
It is discretized on the period grid as ``A[i, j] = K_s[i, j] m_j h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _backend
from .errors import ConvergenceError, ValidationError
from .habitat import Grid, PeriodicField
from .kernel import Kernel, periodize_weighted

RIGHTWARD = "rightward"
LEFTWARD = "leftward"

EIGEN_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10
MAX_ITER = 100_000


def _sign(direction: str) -> float:
    if direction == RIGHTWARD:
        return 1.0
    if direction == LEFTWARD:
        return -1.0
    raise ValueError(f"direction must be {RIGHTWARD!r} or {LEFTWARD!r}, got {direction!r}")


@dataclass(frozen=True, eq=False)
class WeightedOperator:
    """Nyström matrix of a weighted periodic integral operator."""

    matrix: np.ndarray
    mu: float
    m: PeriodicField
    direction: str = RIGHTWARD

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ phi


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Principal eigenpair with its sup-norm residual.

    ``phi`` is positive and normalized so that its maximum is 1.
    """

    lam: float
    phi: PeriodicField
    residual: float
    iterations: int

    @property
    def vector(self) -> np.ndarray:
        return self.phi.values


def assemble(m: PeriodicField, k: Kernel, grid: Grid, mu: float,
             direction: str = RIGHTWARD, rule: str = "cell") -> WeightedOperator:
    """Assemble the weighted operator for multiplier ``m`` and kernel ``k``.

    Raises:
        DomainError: ``|mu|`` is not below the kernel's abscissa.
        ValidationError: ``m`` is not strictly positive or not on ``grid``.
    """
    if m.n != grid.n or m.L != grid.L:
        raise ValidationError("multiplier field is not on the given grid")
    if not np.all(m.values > 0):
        raise ValidationError(f"multiplier must be positive; min {m.min():g} at x={m.argmin_x():g}")
    K = periodize_weighted(k, grid, _sign(direction) * mu, rule)
    A = K * (m.values * grid.h)[None, :]
    A.setflags(write=False)
    return WeightedOperator(A, float(mu), m, direction)


def assemble_dense(kernel2: Callable[[np.ndarray, np.ndarray], np.ndarray], m: PeriodicField,
                   grid: Grid, mu: float, images: int = 8,
                   direction: str = RIGHTWARD) -> WeightedOperator:
    """Point-rule operator for a general two-variable kernel ``k(x, y)``.

    The kernel must satisfy ``k(x + L, y + L) = k(x, y)``; images
    ``y_j + m L`` for ``|m| <= images`` are summed.
    """
    s = _sign(direction) * mu
    x = grid.x[:, None]
    A = np.zeros((grid.n, grid.n))
    for j in range(-images, images + 1):
        y = grid.x[None, :] + j * grid.L
        A += kernel2(x, y) * np.exp(s * (x - y))
    A *= (m.values * grid.h)[None, :]
    A.setflags(write=False)
    return WeightedOperator(A, float(mu), m, direction)


def principal_eigen(op: WeightedOperator, phi0: np.ndarray | None = None,
                    rtol: float = EIGEN_RTOL, res_tol: float = RESIDUAL_RTOL,
                    max_iter: int = MAX_ITER) -> EigenResult:
    """Perron root and eigenfunction by max-norm power iteration.

    Args:
        op: Assembled operator.
        phi0: Positive starting vector; the constant vector by default.

    Raises:
        ConvergenceError: No convergence within ``max_iter`` iterations.
    """
    start = np.ones(op.n) if phi0 is None else np.asarray(phi0, dtype=float)
    if start.shape != (op.n,) or not np.all(start > 0):
        start = np.ones(op.n)
    lam, phi, res, iters, ok = _backend.impl.power_iterate(op.matrix, start, rtol, res_tol, max_iter)
    if not ok:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} iterations "
            f"(lambda~{lam:.12g}, residual {res:.3g}); the spectral gap may be tiny")
    if not np.all(phi > 0):
        raise ConvergenceError("principal eigenvector has nonpositive entries; operator may be reducible")
    return EigenResult(lam, PeriodicField(phi, op.m.L), res, iters)


def dense_eigen(op: WeightedOperator) -> tuple[float, np.ndarray]:
    """Largest-modulus eigenvalue and its eigenvector by full decomposition.

    Used as an independent check on :func:`principal_eigen`.
    """
    w, v = np.linalg.eig(op.matrix)
    i = int(np.argmax(np.abs(w)))
    vec = np.real(v[:, i])
    vec = vec / vec[np.argmax(np.abs(vec))]
    return float(np.real(w[i])), vec


def is_irreducible(op: WeightedOperator) -> bool:
    """True when some power A^p with p >= n is entrywise positive."""
    B = (op.matrix > 0).astype(np.float64)
    P = B.copy()
    power = 1
    while power < op.n:
        P = ((P @ P) > 0).astype(np.float64)
        power *= 2
    return bool(np.all(P > 0))


def eigenvalue(m: PeriodicField, k: Kernel, grid: Grid, mu: float,
               direction: str = RIGHTWARD, phi0: np.ndarray | None = None) -> EigenResult:
    """Shorthand for ``principal_eigen(assemble(...))``."""
    return principal_eigen(assemble(m, k, grid, mu, direction), phi0)


class CurvePoint(NamedTuple):
    mu: float
    lam: float
    g: float  # ln(lam)/mu


def growth_rate_ratio(lam: float, mu: float) -> float:
    """ln(lam)/mu with the mu -> 0 limits made explicit."""
    if mu == 0:
        ln = math.log(lam)
        if ln > 0:
            return math.inf
        return -math.inf if ln < 0 else math.nan
    return math.log(lam) / mu


def lambda_curve(m: PeriodicField, k: Kernel, grid: Grid, mu_min: float, mu_max: float,
                 samples: int, direction: str = RIGHTWARD) -> list[CurvePoint]:
    """Sample lambda(mu) on an even grid, warm-starting each solve.

    Raises:
        ValueError: Invalid range or sample count.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if not (0 <= mu_min < mu_max):
        raise ValueError(f"need 0 <= mu_min < mu_max, got {mu_min}, {mu_max}")
    out = []
    phi = None
    for mu in np.linspace(mu_min, mu_max, samples):
        res = eigenvalue(m, k, grid, float(mu), direction, phi)
        phi = res.vector
        out.append(CurvePoint(float(mu), res.lam, growth_rate_ratio(res.lam, float(mu))))
    return out

"""Semi-trivial periodic steady states of the scalar Beverton-Holt map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import assemble, principal_eigen
from .errors import ConvergenceError, ValidationError
from .habitat import Grid, Habitat, PeriodicField
from .kernel import Kernel

STEADY_TOL = 1e-12
STEADY_MAX_ITER = 50_000
MARGINAL_BAND = 1e-10

PERSISTS = "persists"
EXTINCT = "extinct"
MARGINAL = "marginal"


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Fixed point of p -> K[r p / (1 + b p)] on one period.

    ``status`` is ``"persists"`` when the persistence eigenvalue exceeds 1,
    ``"extinct"`` when it is at most 1 (the zero field is returned), and
    ``"marginal"`` when it lies within 1e-10 of 1.
    """

    field: PeriodicField
    lambda0: float
    iterations: int
    residual: float
    status: str

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def persistence_eigenvalue(r: PeriodicField, k: Kernel, grid: Grid) -> float:
    """Principal eigenvalue of the unweighted operator with multiplier ``r``."""
    return principal_eigen(assemble(r, k, grid, 0.0)).lam


def scalar_steady_state(r: PeriodicField, b: PeriodicField, k: Kernel, grid: Grid,
                        init: PeriodicField | np.ndarray | None = None,
                        tol: float = STEADY_TOL, max_iter: int = STEADY_MAX_ITER) -> SteadyState:
    """Picard iteration of the periodic Beverton-Holt map.

    Args:
        r: Growth factor field.
        b: Crowding coefficient field, ``(r - 1) / C``.
        init: Starting field; ``(r - 1) / b`` (the local capacity) by default.

    Raises:
        ConvergenceError: Successive iterates still differ by more than
            ``tol`` after ``max_iter`` steps.
    """
    op = assemble(r, k, grid, 0.0)
    lam = principal_eigen(op).lam
    if lam <= 1.0 + MARGINAL_BAND:
        status = MARGINAL if abs(lam - 1.0) < MARGINAL_BAND else EXTINCT
        return SteadyState(PeriodicField(np.zeros(grid.n), grid.L), lam, 0, 0.0, status)
    K = assemble(PeriodicField.constant(1.0, grid), k, grid, 0.0).matrix
    rv, bv = r.values, b.values
    if init is None:
        p = (rv - 1.0) / bv
    else:
        p = np.array(init.values if isinstance(init, PeriodicField) else init, dtype=float)
        if p.shape != (grid.n,) or np.any(p < 0) or not np.any(p > 0):
            raise ValidationError("initial field must be nonnegative and positive somewhere")

    def T(u):
        return K @ (rv * u / (1.0 + bv * u))

    for it in range(1, max_iter + 1):
        nxt = T(p)
        diff = float(np.max(np.abs(nxt - p)))
        p = nxt
        if diff < tol:
            res = float(np.max(np.abs(T(p) - p)))
            return SteadyState(PeriodicField(p, grid.L), lam, it, res, PERSISTS)
    raise ConvergenceError(f"steady-state iteration did not settle within {max_iter} steps")


def semi_trivial_states(habitat: Habitat, k1: Kernel, k2: Kernel,
                        grid: Grid) -> tuple[SteadyState, SteadyState]:
    """(p*, q*): each species alone in the habitat."""
    p = scalar_steady_state(habitat.r1, habitat.b1, k1, grid)
    q = scalar_steady_state(habitat.r2, habitat.b2, k2, grid)
    return p, q

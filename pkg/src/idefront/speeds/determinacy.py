"""Linear determinacy: the linearized pair, its upper solution and the verdict.

All work happens in transformed coordinates u = p, v = q* - q, where the
invaded state is (0, 0) and the linearization there is

    u' = K1[ r1 / (1 + b1 a1 q*) u ]
    v' = K2[ r2 / (1 + b2 q*)^2 (b2 a2 q* u + v) ].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _backend
from ..eigen import RIGHTWARD, assemble, principal_eigen
from ..errors import PositivityError, SingularSystemError
from ..habitat import Grid, Habitat, PeriodicField
from ..kernel import Kernel
from ..steady import semi_trivial_states
from .minimize import SpeedReport, spreading_speed

SINGULAR_GAP = 1e-10
PAIR_RESIDUAL = 1e-9
# the upper-solution check needs eigenvectors well below its slack tolerance
_POLISHED_RESIDUAL = 1e-14


def _pf(values: np.ndarray, grid: Grid) -> PeriodicField:
    return PeriodicField(values, grid.L)


def linearized_multipliers(habitat: Habitat, q_star: np.ndarray, grid: Grid) -> dict[str, PeriodicField]:
    """Multiplier fields of the linearized problems, keyed by role.

    ``"u"``: r1 / (1 + b1 a1 q*), species 1 facing the resident.
    ``"v"``: r2 / (1 + b2 q*)^2, species 2's own linear term.
    ``"coupling"``: r2 b2 a2 q* / (1 + b2 q*)^2, the u -> v source term.
    ``"resident"``: r2 / (1 + b2 q*), the resident's linearization at q*.
    """
    r1, b1, a1 = habitat.r1.values, habitat.b1.values, habitat.a1.values
    r2, b2, a2 = habitat.r2.values, habitat.b2.values, habitat.a2.values
    qs = np.asarray(q_star, dtype=float)
    d2 = 1.0 + b2 * qs
    return {
        "u": _pf(r1 / (1.0 + b1 * a1 * qs), grid),
        "v": _pf(r2 / d2**2, grid),
        "coupling": _pf(r2 * b2 * a2 * qs / d2**2, grid),
        "resident": _pf(r2 / d2, grid),
    }


@dataclass(frozen=True, eq=False)
class LinearizedEigenPair:
    """Positive periodic eigenfunction (phi1, phi2) of the linearized system at mu0."""

    mu0: float
    lambda0: float
    lambda_bar: float
    phi1: PeriodicField
    phi2: PeriodicField
    residual: float

    @property
    def d1_margin(self) -> float:
        return self.lambda0 - self.lambda_bar


def linearized_pair(habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid, mu0: float,
                    q_star: np.ndarray | None = None) -> LinearizedEigenPair:
    """Solve the coupled linear eigenproblem at ``mu0``.

    phi1 is the principal eigenfunction of the ``"u"`` problem with
    eigenvalue lambda0; phi2 then solves (lambda0 I - A_v) phi2 = A_c phi1,
    where A_v and A_c are the weighted operators with the ``"v"`` and
    ``"coupling"`` multipliers and kernel ``k2``.

    Raises:
        SingularSystemError: lambda0 - lambda_bar < 1e-10, lambda_bar being
            the principal eigenvalue of A_v.
        PositivityError: phi2 has a nonpositive entry.
    """
    if q_star is None:
        q_star = semi_trivial_states(habitat, k1, k2, grid)[1].values
    mult = linearized_multipliers(habitat, q_star, grid)
    op_u = assemble(mult["u"], k1, grid, mu0, RIGHTWARD)
    eig_u = principal_eigen(op_u, res_tol=_POLISHED_RESIDUAL)
    lam0, phi1 = eig_u.lam, eig_u.vector
    op_v = assemble(mult["v"], k2, grid, mu0, RIGHTWARD)
    A_v = op_v.matrix
    lam_bar = principal_eigen(op_v).lam
    if lam0 - lam_bar < SINGULAR_GAP:
        raise SingularSystemError(
            f"lambda0 - lambda_bar = {lam0 - lam_bar:.3g} < {SINGULAR_GAP:g}; "
            "the second component cannot be solved for")
    A_c = assemble(mult["coupling"], k2, grid, mu0, RIGHTWARD).matrix
    rhs = A_c @ phi1
    phi2 = np.linalg.solve(lam0 * np.eye(grid.n) - A_v, rhs)
    if not np.all(phi2 > 0):
        i = int(np.argmin(phi2))
        raise PositivityError(
            f"second eigenfunction component is nonpositive ({phi2[i]:.3g} at x={i * grid.h:g})")
    res1 = float(np.max(np.abs(op_u.matrix @ phi1 - lam0 * phi1)))
    res2 = float(np.max(np.abs(A_v @ phi2 + rhs - lam0 * phi2)))
    return LinearizedEigenPair(float(mu0), lam0, lam_bar, _pf(phi1, grid), _pf(phi2, grid),
                               max(res1, res2))


def d2_margin(habitat: Habitat, phi1: np.ndarray, phi2: np.ndarray) -> float:
    """min over the grid of phi1/phi2 - max(a1, 1/a2)."""
    bound = np.maximum(habitat.a1.values, 1.0 / habitat.a2.values)
    return float(np.min(np.asarray(phi1) / np.asarray(phi2) - bound))


def upper_constants(habitat: Habitat, pair: LinearizedEigenPair,
                    q_star: np.ndarray) -> tuple[float, float]:
    """Scale constants (h1, h2) tying the eigenfunction pair to the resident state.

    h2 = max q*/phi2 is the smallest multiple of phi2 that dominates q*, and
    h1 = min h2 phi2 / (a2 phi1).

    Returns:
        (h1, h2).
    """
    phi1, phi2 = pair.phi1.values, pair.phi2.values
    h2 = float(np.max(np.asarray(q_star) / phi2))
    h1 = float(np.min(h2 * phi2 / (habitat.a2.values * phi1)))
    return h1, h2


@dataclass(frozen=True, eq=False)
class UpperSolutionReport:
    """Outcome of checking Q[S_n] <= S_{n+1} on a finite window.

    ``slack[n]`` is the minimum over the window and both components of
    (S_{n+1} - Q[S_n]) / S_{n+1}. Points whose growth denominators are not
    positive are left out and counted in ``invalid_points``.
    """

    min_slack: float
    slack: list[float]
    window: tuple[float, float]
    points: int
    invalid_points: int
    amplitude: float
    h1: float = math.nan
    h2: float = math.nan

    @property
    def holds(self) -> bool:
        return self.min_slack >= -1e-10


def verify_upper_solution(habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid,
                          pair: LinearizedEigenPair, amplitude: float | None = None,
                          steps: int = 6, decades: float = 40.0,
                          q_star: np.ndarray | None = None) -> UpperSolutionReport:
    """Check that S_n = M exp(-mu0 x) lambda0^n (phi1, phi2) is an upper solution.

    The transformed map is applied to S_n on a window where mu0 x spans
    ``decades`` e-folds, using the same cell quadrature as the eigenproblem so
    that the linear part reproduces S_{n+1} to rounding. S_n is known in
    closed form outside the window, so no truncation enters.

    Args:
        amplitude: The constant M; h2 from :func:`upper_constants` by default.
        steps: Check n = 0 .. steps - 1.
    """
    if q_star is None:
        q_star = semi_trivial_states(habitat, k1, k2, grid)[1].values
    qs = np.asarray(q_star, dtype=float)
    h1, h2 = upper_constants(habitat, pair, qs)
    if amplitude is None:
        amplitude = h2
    mu0, lam0 = pair.mu0, pair.lambda0
    h, n = grid.h, grid.n
    half = int(math.ceil(0.5 * decades / mu0 / h))
    w1 = k1.discrete_weights(h, mu0)
    w2 = k2.discrete_weights(h, mu0)
    s1, s2 = (w1.size - 1) // 2, (w2.size - 1) // 2
    S = max(s1, s2)
    idx = np.arange(-half - S, half + S + 1)
    cls = idx % n
    y = idx * h
    hab = habitat
    r1, b1, a1 = hab.r1.values[cls], hab.b1.values[cls], hab.a1.values[cls]
    r2, b2, a2 = hab.r2.values[cls], hab.b2.values[cls], hab.a2.values[cls]
    q = qs[cls]
    phi1 = pair.phi1.values[cls]
    phi2 = pair.phi2.values[cls]
    out = slice(S, S + 2 * half + 1)
    slacks = []
    invalid_total = 0
    for step in range(steps):
        scale = amplitude * lam0**step
        env = np.exp(-mu0 * y)
        u = scale * env * phi1
        v = scale * env * phi2
        d1 = 1.0 + b1 * (u + a1 * (q - v))
        d2 = 1.0 + b2 * (q + a2 * u - v)
        bad = (d1 <= 0) | (d2 <= 0)
        g1, g2 = _backend.impl.growth_cooperative(u, v, q, r1, b1, a1, r2, b2, a2)
        # carry the exponential envelope inside the convolution to keep terms O(1)
        e1 = np.where(bad, 0.0, np.exp(mu0 * y) * g1)
        e2 = np.where(bad, 0.0, np.exp(mu0 * y) * g2)
        c1 = _backend.impl.convolve_valid(e1[S - s1:e1.size - (S - s1)], w1)
        c2 = _backend.impl.convolve_valid(e2[S - s2:e2.size - (S - s2)], w2)
        # relative slack: 1 - Q[S_n] / S_{n+1}, both divided by exp(-mu0 x)
        rel1 = 1.0 - c1 / (lam0 * scale * phi1[out])
        rel2 = 1.0 - c2 / (lam0 * scale * phi2[out])
        touched1 = np.convolve(bad.astype(float), np.ones(2 * s1 + 1), "same")[out] > 0
        touched2 = np.convolve(bad.astype(float), np.ones(2 * s2 + 1), "same")[out] > 0
        ok1, ok2 = ~touched1, ~touched2
        invalid_total += int(np.count_nonzero(touched1 | touched2))
        vals = np.concatenate([rel1[ok1], rel2[ok2]])
        slacks.append(float(vals.min()) if vals.size else math.nan)
    finite = [s for s in slacks if math.isfinite(s)]
    return UpperSolutionReport(min(finite) if finite else math.nan, slacks,
                               (float(-half * h), float(half * h)), 2 * half + 1,
                               invalid_total, float(amplitude), h1, h2)


@dataclass(frozen=True, eq=False)
class DeterminacyVerdict:
    """Whether the two sufficient conditions for linear determinacy hold."""

    linearly_determinate: bool
    c0: SpeedReport
    d1_margin: float
    d2_margin: float
    pair: LinearizedEigenPair | None
    note: str = ""

    def to_dict(self) -> dict:
        return {"linearly_determinate": self.linearly_determinate, "c0": self.c0.to_dict(),
                "d1_margin": self.d1_margin, "d2_margin": self.d2_margin, "note": self.note}


def determinacy_verdict(habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid,
                        q_star: np.ndarray | None = None) -> DeterminacyVerdict:
    """Compute c0 from the ``"u"`` problem, then both margins at its minimizer.

    When the pair cannot be built, the D2 margin is reported as the D1 margin
    (singular system) or -1 (phi2 not positive), and ``note`` says why.
    """
    if q_star is None:
        q_star = semi_trivial_states(habitat, k1, k2, grid)[1].values
    mult = linearized_multipliers(habitat, q_star, grid)
    c0 = spreading_speed(mult["u"], k1, grid)
    lam0 = c0.lambda_mu0
    lam_bar = principal_eigen(assemble(mult["v"], k2, grid, c0.mu0)).lam
    d1 = lam0 - lam_bar
    pair = None
    note = ""
    try:
        pair = linearized_pair(habitat, k1, k2, grid, c0.mu0, q_star)
        d2 = d2_margin(habitat, pair.phi1.values, pair.phi2.values)
    except SingularSystemError as exc:
        d2, note = d1, str(exc)
    except PositivityError as exc:
        d2, note = -1.0, str(exc)
    return DeterminacyVerdict(bool(d1 > 0 and d2 > 0), c0, float(d1), float(d2), pair, note)

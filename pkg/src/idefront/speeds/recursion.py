"""Moving-frame recursion that classifies trial speeds, and a bisection on top of it.

A state ``a`` is a function of a frame coordinate ``s`` and a phase ``theta``
in one period. It is stored as ``W[component, row, column]`` with rows at
spacing h in s and columns at the n phase nodes. For each row the map builds
the line function whose value on period k is the row k periods further on,
applies growth and dispersal, and evaluates the result at the phases of
period 0. One step of the recursion is

    a_{n+1}(s) = max(phi(s), Qhat[a_n](s + c)),

with the shift done by linear interpolation between rows. a_n is
nondecreasing in n, and its limit at the right edge tells whether the
population keeps up with a frame moving at c.

The window is closed with the last row repeated on the left, where a is
close to beta, and with zeros on the right. Repeating the right edge instead
would let any tiny value there act as a uniform population ahead of the
front and grow regardless of c. Each row holds a whole period of phases and
dispersal reaches R = ``reach`` rows further, so the boundary layer left by
the zero closure reaches about two periods plus R into the window, and the
classification reads the period just left of it.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import _backend
from ..errors import InconclusiveError, ValidationError
from ..habitat import Grid, Habitat, PeriodicField
from ..kernel import Kernel
from ..steady import scalar_steady_state, semi_trivial_states
from .minimize import SpeedReport

BETA_LIMIT = "beta_limit"
INTERMEDIATE = "intermediate"
ZERO_LIMIT = "zero_limit"
INCONCLUSIVE = "inconclusive"

NEAR_BETA = 0.05
NEAR_ZERO = 1e-4
STABLE_TOL = 1e-8
STABLE_WINDOW = 50
MAX_STEPS = 20_000
BRACKET_WIDTH = 1e-2


@dataclass(frozen=True, eq=False)
class RecursionSystem:
    """Monotone map in frame coordinates, ready for the recursion.

    Attributes:
        beta: Upper equilibrium, shape (components, n).
        weights: One discrete kernel per component, all padded to one length.
        growth: Maps an array of shape (components, rows, n) to the
            pre-dispersal values of the same shape.
    """

    grid: Grid
    beta: np.ndarray
    weights: np.ndarray
    growth: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    @property
    def components(self) -> int:
        return self.beta.shape[0]

    @property
    def reach(self) -> int:
        return (self.weights.shape[1] - 1) // 2

    @classmethod
    def scalar(cls, r: PeriodicField, C: PeriodicField, k: Kernel, grid: Grid) -> "RecursionSystem":
        """Single species: u -> K[r u / (1 + b u)] with b = (r - 1) / C."""
        rv = r.values
        bv = (rv - 1.0) / C.values
        beta = scalar_steady_state(r, PeriodicField(bv, grid.L), k, grid).values

        def growth(W):
            return rv * W / (1.0 + bv * W)

        return cls(grid, beta[None, :], k.discrete_weights(grid.h)[None, :], growth, "scalar")

    @classmethod
    def cooperative(cls, habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid,
                    states: tuple[np.ndarray, np.ndarray] | None = None) -> "RecursionSystem":
        """Two species in coordinates u = p, v = q* - q, with beta = (p*, q*)."""
        if states is None:
            p_s, q_s = semi_trivial_states(habitat, k1, k2, grid)
            states = (p_s.values, q_s.values)
        p_star, q_star = (np.asarray(s, dtype=float) for s in states)
        h = habitat
        coef = (q_star, h.r1.values, h.b1.values, h.a1.values,
                h.r2.values, h.b2.values, h.a2.values)

        tiles: dict[int, list[np.ndarray]] = {}

        def growth(W):
            rows = W.shape[1]
            if rows not in tiles:
                tiles[rows] = [np.tile(c, rows) for c in coef]
            tiled = tiles[rows]
            g1, g2 = _backend.impl.growth_cooperative(W[0].ravel(), W[1].ravel(), *tiled)
            return np.stack([g1.reshape(rows, -1), g2.reshape(rows, -1)])

        w1 = k1.discrete_weights(grid.h)
        w2 = k2.discrete_weights(grid.h)
        size = max(w1.size, w2.size)
        weights = np.stack([np.pad(w, ((size - w.size) // 2,)) for w in (w1, w2)])
        return cls(grid, np.stack([p_star, q_star]), weights, growth, "cooperative")


@dataclass(frozen=True)
class Classification:
    """Outcome of running the recursion at one trial speed."""

    c: float
    outcome: str
    steps: int
    edge_distance: float
    edge_value: float


def _initial(system: RecursionSystem, s: np.ndarray) -> np.ndarray:
    """beta/2 times a ramp in the position s + theta.

    The ramp is 1 up to -L, falls linearly to 0 at 0 and stays 0 beyond, so
    the floor vanishes for s >= 0 and does not increase in s.
    """
    y = s[:, None] + system.grid.x[None, :]
    chi = np.clip(-y / system.grid.L, 0.0, 1.0)
    return 0.5 * system.beta[:, None, :] * chi[None, :, :]


def recursion_classify(c: float, system: RecursionSystem, domain_halfwidth: float | None = None,
                       max_steps: int = MAX_STEPS) -> Classification:
    """Run the recursion at speed ``c`` and classify the limit at the right edge.

    The probed period is [X - 3L - R, X - 2L - R], R being the dispersal
    reach, clear of the boundary layer at the right end and at least one
    period right of the initial front at s = 0, so the window is never
    narrower than 4L + R.

    The run ends early once the probed period is within 5% of beta in
    relative sup norm; since a_n only increases, that outcome is final.
    Otherwise it ends when the probed values changed by less than 1e-8 of
    their own size over the last 50 steps, and the limit is then called
    ``zero_limit`` below 1e-4 max(beta) and ``intermediate`` otherwise.

    Args:
        domain_halfwidth: Frame window [-X, X]; 4L + R by default.

    Raises:
        InconclusiveError: Neither test was met within ``max_steps``.
    """
    if not math.isfinite(c):
        raise ValidationError("trial speed must be finite")
    grid = system.grid
    n, h = grid.n, grid.h
    S = system.reach
    X = 4.0 * grid.L + S * h if domain_halfwidth is None else float(domain_halfwidth)
    half = max(int(round(X / h)), 4 * n + S)
    rows = 2 * half + 1
    s = (np.arange(rows) - half) * h
    ell = np.arange(-S, n + S)
    # rows past the right end point at an extra all-zero row
    src_row = np.maximum(np.arange(rows)[:, None] + (ell // n)[None, :] * n, 0)
    src_row = np.minimum(src_row, rows)
    src_col = np.broadcast_to(ell % n, src_row.shape)
    floor = _initial(system, s)
    W = floor.copy()
    scale = float(system.beta.max())
    beta_edge = system.beta[:, None, :]
    shift = c / h
    pad = max(int(math.ceil(shift)) + 1, 1)
    floor_padded = np.concatenate([floor, np.zeros((system.components, pad, n))], axis=1)
    probe = slice(rows - 3 * n - S, rows - 2 * n - S)
    history: list[np.ndarray] = []
    conv = _backend.impl.convolve_rows_valid
    shift_max = _backend.impl.shift_rows_max
    G_ext = np.zeros((system.components, rows + pad, n))
    for step in range(1, max_steps + 1):
        G_ext[:, :rows] = system.growth(W)
        nxt = np.empty_like(W)
        for comp in range(system.components):
            Q = np.zeros((rows + pad, n))
            Q[:rows] = conv(G_ext[comp][src_row, src_col], system.weights[comp])
            nxt[comp] = shift_max(Q, shift, floor_padded[comp])[:rows]
        W = nxt
        edge = W[:, probe, :]
        dist = float(np.max(np.abs(edge - beta_edge))) / scale
        if dist <= NEAR_BETA:
            return Classification(c, BETA_LIMIT, step, dist, float(edge.max()))
        history.append(edge)
        if len(history) > STABLE_WINDOW:
            old = history.pop(0)
            top = float(edge.max())
            if float(np.max(np.abs(edge - old))) <= STABLE_TOL * top:
                outcome = ZERO_LIMIT if top < NEAR_ZERO * scale else INTERMEDIATE
                return Classification(c, outcome, step, dist, top)
    raise InconclusiveError(
        f"recursion at c = {c:g} did not settle within {max_steps} steps")


@dataclass(frozen=True)
class SpeedBracket:
    """Intervals known to contain the lower and upper spreading speeds.

    ``lower`` brackets sup{c : limit is beta} and ``upper`` brackets
    inf{c : limit is zero}. ``critical`` lists trial speeds whose run hit the
    step cap; see :func:`recursion_bracket`.
    """

    lower: tuple[float, float]
    upper: tuple[float, float]
    evaluations: list[Classification]
    critical: tuple[float, ...] = ()

    @property
    def lower_speed(self) -> float:
        return 0.5 * (self.lower[0] + self.lower[1])

    @property
    def upper_speed(self) -> float:
        return 0.5 * (self.upper[0] + self.upper[1])

    def report(self) -> SpeedReport:
        """The upper-speed midpoint as a :class:`SpeedReport`."""
        return SpeedReport(self.upper_speed, math.nan, math.nan,
                           [(e.c, math.nan) for e in self.evaluations],
                           "recursion_bracket", evaluations=len(self.evaluations))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper),
                "critical": list(self.critical),
                "evaluations": [{"c": e.c, "outcome": e.outcome, "steps": e.steps}
                                for e in self.evaluations]}


def default_threads() -> int:
    """Worker count from ``IDEFRONT_THREADS``, the number of cores when unset."""
    raw = os.environ.get("IDEFRONT_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ValidationError(f"IDEFRONT_THREADS must be a positive integer, got {raw!r}")
    return value


def recursion_bracket(system: RecursionSystem, c_min: float, c_max: float,
                      domain_halfwidth: float | None = None, width: float = BRACKET_WIDTH,
                      threads: int | None = None, max_steps: int = MAX_STEPS) -> SpeedBracket:
    """Bisect on the classifier until both speed intervals are narrower than ``width``.

    A ``beta_limit`` at c raises both lower ends, a ``zero_limit`` lowers both
    upper ends, and an ``intermediate`` outcome puts c above the lower speed
    and below the upper one. When the two intervals differ, their midpoints
    are classified concurrently.

    The step cap is only reached when c sits almost exactly at a critical
    speed, where the front crawls through the frame. Such a midpoint is
    recorded as ``inconclusive`` and both intervals shrink to the part within
    ``width / 2`` of it. The returned bracket lists these speeds in
    ``critical``.

    Raises:
        ValidationError: c_min does not give beta_limit, or c_max does not
            give zero_limit.
        InconclusiveError: The run at c_min or c_max hit the step cap.
    """
    if not c_min < c_max:
        raise ValidationError(f"need c_min < c_max, got {c_min:g} and {c_max:g}")
    threads = default_threads() if threads is None else max(1, int(threads))

    def classify(c):
        try:
            return recursion_classify(c, system, domain_halfwidth, max_steps)
        except InconclusiveError:
            return Classification(c, INCONCLUSIVE, max_steps, math.nan, math.nan)

    evals: list[Classification] = []
    lo_s, hi_s, lo_b, hi_b = c_min, c_max, c_min, c_max

    def absorb(res: Classification):
        nonlocal lo_s, hi_s, lo_b, hi_b
        evals.append(res)
        if res.outcome == BETA_LIMIT:
            lo_s, lo_b = max(lo_s, res.c), max(lo_b, res.c)
        elif res.outcome == ZERO_LIMIT:
            hi_s, hi_b = min(hi_s, res.c), min(hi_b, res.c)
        elif res.outcome == INCONCLUSIVE:
            a, b = res.c - 0.5 * width, res.c + 0.5 * width
            lo_s, hi_s = max(lo_s, a), min(hi_s, b)
            lo_b, hi_b = max(lo_b, a), min(hi_b, b)
        else:
            hi_s, lo_b = min(hi_s, res.c), max(lo_b, res.c)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        ends = list(pool.map(classify, (c_min, c_max)))
        for e in ends:
            if e.outcome == INCONCLUSIVE:
                raise InconclusiveError(f"recursion at c = {e.c:g} did not settle within {max_steps} steps")
        if ends[0].outcome != BETA_LIMIT:
            raise ValidationError(f"c_min = {c_min:g} gives {ends[0].outcome}, expected {BETA_LIMIT}")
        if ends[1].outcome != ZERO_LIMIT:
            raise ValidationError(f"c_max = {c_max:g} gives {ends[1].outcome}, expected {ZERO_LIMIT}")
        evals.extend(ends)
        while hi_s - lo_s > width or hi_b - lo_b > width:
            mids = []
            if hi_s - lo_s > width:
                mids.append(0.5 * (lo_s + hi_s))
            if hi_b - lo_b > width:
                m = 0.5 * (lo_b + hi_b)
                if not any(abs(m - x) <= 0.25 * width for x in mids):
                    mids.append(m)
            for res in pool.map(classify, mids):
                absorb(res)
    critical = tuple(e.c for e in evals if e.outcome == INCONCLUSIVE)
    return SpeedBracket((lo_s, hi_s), (lo_b, hi_b), evals, critical)

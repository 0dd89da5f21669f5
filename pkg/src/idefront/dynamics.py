"""Forward simulation on a truncated line, front tracking and wave profiles.

Dispersal is a direct banded convolution with exact cell masses of the
kernel. The domain is padded on both sides by one kernel radius filled with
the far-field states selected by the boundary policy, and after each step the
outermost period on each side (the guard bands) is reset to those states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import _backend
from .errors import FrontLostError, InsufficientDataError, SchemaError, ValidationError
from .habitat import Grid, Habitat
from .kernel import Kernel
from .steady import semi_trivial_states

POLICIES = ("invasion", "spread", "compact")


@dataclass(frozen=True, eq=False)
class SimState:
    """Densities of both species on the simulation grid after ``step`` steps."""

    p: np.ndarray
    q: np.ndarray
    step: int = 0


class Dynamics:
    """Stepping context for one habitat, kernel pair, grid and boundary policy.

    Args:
        habitat: Coefficient fields.
        k1, k2: Dispersal kernels of species 1 and 2.
        grid: Period grid; ``grid.sim_periods`` fixes the domain.
        boundary: ``"invasion"`` pins the far left to (p*, 0) and the far
            right to (0, q*); ``"spread"`` pins them to (p*, 0) and (0, 0);
            ``"compact"`` pins both to (0, 0).
        p_star, q_star: Semi-trivial steady states on one period; computed
            when omitted.
    """

    def __init__(self, habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid,
                 boundary: str = "invasion", p_star: np.ndarray | None = None,
                 q_star: np.ndarray | None = None):
        if boundary not in POLICIES:
            raise ValidationError(f"boundary must be one of {POLICIES}, got {boundary!r}")
        if habitat.n != grid.n or habitat.L != grid.L:
            raise ValidationError("habitat is not on the given grid")
        self.habitat, self.k1, self.k2, self.grid, self.boundary = habitat, k1, k2, grid, boundary
        if p_star is None or q_star is None:
            ps, qs = semi_trivial_states(habitat, k1, k2, grid)
            p_star = ps.values if p_star is None else p_star
            q_star = qs.values if q_star is None else q_star
        self.p_star = np.asarray(p_star, dtype=float)
        self.q_star = np.asarray(q_star, dtype=float)
        n = grid.n
        zero = np.zeros(n)
        if boundary == "invasion":
            self.left = (self.p_star, zero)
            self.right = (zero, self.q_star)
        elif boundary == "spread":
            self.left = (self.p_star, zero)
            self.right = (zero, zero)
        else:
            self.left = (zero, zero)
            self.right = (zero, zero)
        self.w1 = k1.discrete_weights(grid.h)
        self.w2 = k2.discrete_weights(grid.h)
        self.s1 = (self.w1.size - 1) // 2
        self.s2 = (self.w2.size - 1) // 2
        self.pad = max(self.s1, self.s2)
        N = grid.sim_size
        cls = np.arange(-self.pad, N + self.pad) % n
        self._cls = cls
        hab = habitat
        self._r1, self._b1, self._a1 = hab.r1.values[cls], hab.b1.values[cls], hab.a1.values[cls]
        self._r2, self._b2, self._a2 = hab.r2.values[cls], hab.b2.values[cls], hab.a2.values[cls]
        self._qs = self.q_star[cls]
        lpad = np.arange(-self.pad, 0) % n
        rpad = np.arange(N, N + self.pad) % n
        self._lpad, self._rpad = lpad, rpad

    @property
    def x(self) -> np.ndarray:
        return self.grid.sim_x

    @property
    def size(self) -> int:
        return self.grid.sim_size

    # -- helpers -----------------------------------------------------------
    def _extend(self, arr: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        return np.concatenate([left[self._lpad], arr, right[self._rpad]])

    def _disperse(self, g1: np.ndarray, g2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        impl = _backend.impl
        P, N = self.pad, self.size
        p = impl.convolve_valid(g1[P - self.s1:P + N + self.s1], self.w1)
        q = impl.convolve_valid(g2[P - self.s2:P + N + self.s2], self.w2)
        return p, q

    def _pin(self, a: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        n = self.grid.n
        a[:n] = left
        a[-n:] = right
        return a

    # -- competitive system --------------------------------------------------
    def step(self, state: SimState) -> SimState:
        """One generation of growth followed by dispersal."""
        (lp, lq), (rp, rq) = self.left, self.right
        pe = self._extend(state.p, lp, rp)
        qe = self._extend(state.q, lq, rq)
        g1, g2 = _backend.impl.growth_competitive(pe, qe, self._r1, self._b1, self._a1,
                                                  self._r2, self._b2, self._a2)
        p, q = self._disperse(g1, g2)
        p = self._pin(np.maximum(p, 0.0), lp, rp)
        q = self._pin(np.maximum(q, 0.0), lq, rq)
        return SimState(p, q, state.step + 1)

    # -- cooperative system ------------------------------------------------
    def to_cooperative(self, p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) = (p, q* - q) on the simulation grid."""
        return p.copy(), self.grid.tile(self.q_star) - q

    def from_cooperative(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return u.copy(), self.grid.tile(self.q_star) - v

    def step_cooperative(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One step of the transformed (order-preserving) system."""
        (lp, lq), (rp, rq) = self.left, self.right
        lu, lv = lp, self.q_star - lq
        ru, rv = rp, self.q_star - rq
        ue = self._extend(u, lu, ru)
        ve = self._extend(v, lv, rv)
        g1, g2 = self.growth_cooperative(ue, ve)
        un, vn = self._disperse(g1, g2)
        return self._pin(un, lu, ru), self._pin(vn, lv, rv)

    def growth_cooperative(self, u, v, cls=None):
        """Pre-dispersal terms of the transformed system at grid classes ``cls``."""
        if cls is None:
            r1, b1, a1, r2, b2, a2, qs = (self._r1, self._b1, self._a1, self._r2, self._b2,
                                          self._a2, self._qs)
        else:
            hab = self.habitat
            r1, b1, a1 = hab.r1.values[cls], hab.b1.values[cls], hab.a1.values[cls]
            r2, b2, a2 = hab.r2.values[cls], hab.b2.values[cls], hab.a2.values[cls]
            qs = self.q_star[cls]
        return _backend.impl.growth_cooperative(u, v, qs, r1, b1, a1, r2, b2, a2)

    # -- initial data --------------------------------------------------------
    def initial_state(self, kind: str = "step") -> SimState:
        """Standard initial data.

        ``"step"``: p = p* on x < 0, q = q* everywhere (invasion) or 0.
        ``"periodic"``: p = p* on x < 0 and q = q* on x >= 0.
        Anything else is read as a CSV path with columns ``x,p,q``.
        """
        x = self.x
        ps, qs = self.grid.tile(self.p_star), self.grid.tile(self.q_star)
        left = x < 0
        if kind == "step":
            if self.boundary == "compact":
                p = np.where((x >= -self.grid.L) & left, ps, 0.0)
            else:
                p = np.where(left, ps, 0.0)
            q = qs.copy() if self.boundary == "invasion" else np.zeros_like(x)
        elif kind == "periodic":
            p = np.where(left, ps, 0.0)
            q = np.where(left, 0.0, qs)
        else:
            p, q = read_state_csv(kind, x)
        (lp, lq), (rp, rq) = self.left, self.right
        return SimState(self._pin(p, lp, rp), self._pin(q, lq, rq), 0)

    def simulate(self, init: SimState, steps: int, snapshot_every: int = 1,
                 extra: tuple[int, ...] = ()) -> "Trajectory":
        """Run ``steps`` generations, keeping every ``snapshot_every``-th state.

        Steps listed in ``extra`` and the final state are always kept.
        """
        if steps < 1:
            raise ValidationError("steps must be at least 1")
        keep = set(extra)
        snaps = [init] if init.step % snapshot_every == 0 or init.step in keep else []
        s = init
        for _ in range(steps):
            s = self.step(s)
            if s.step % snapshot_every == 0 or s.step in keep:
                snaps.append(s)
        if snaps[-1] is not s:
            snaps.append(s)
        return Trajectory(snaps, self)


@dataclass(eq=False)
class Trajectory:
    """Recorded states of one simulation run."""

    states: list[SimState]
    dynamics: Dynamics

    @property
    def x(self) -> np.ndarray:
        return self.dynamics.x

    @property
    def steps(self) -> list[int]:
        return [s.step for s in self.states]

    def at(self, step: int) -> SimState:
        for s in self.states:
            if s.step == step:
                return s
        raise KeyError(f"no snapshot recorded at step {step}")


@dataclass(frozen=True, eq=False)
class FrontTrace:
    """Front positions and the least-squares speed fitted to them."""

    threshold: float
    steps: np.ndarray
    positions: np.ndarray
    speed: float
    stderr: float
    fit_from: int


def front_position(p: np.ndarray, x: np.ndarray, theta: float) -> float:
    """Rightmost x where ``p`` crosses ``theta`` downward, linearly interpolated.

    Returns NaN when ``p`` never reaches ``theta``.
    """
    above = np.nonzero(p >= theta)[0]
    if above.size == 0:
        return math.nan
    i = int(above[-1])
    if i == p.size - 1:
        return float(x[-1])
    h = x[1] - x[0]
    return float(x[i] + (p[i] - theta) / (p[i] - p[i + 1]) * h)


def track_front(traj: Trajectory, theta: float | None = None) -> FrontTrace:
    """Follow the invasion edge of species 1 and fit its speed.

    Args:
        traj: A trajectory with snapshots at consecutive steps.
        theta: Level set; a quarter of min p* by default.

    Raises:
        FrontLostError: The front came within one period of the right guard band.
    """
    dyn = traj.dynamics
    if theta is None:
        theta = 0.25 * float(np.min(dyn.p_star))
    if not theta > 0:
        raise ValidationError("front threshold must be positive")
    grid = dyn.grid
    limit = (grid.sim_periods // 2 - 2) * grid.L
    steps, pos = [], []
    for s in traj.states:
        xf = front_position(s.p, dyn.x, theta)
        if xf > limit:
            raise FrontLostError(
                f"front at x={xf:.4g} reached within one period of the right guard band "
                f"at step {s.step}; enlarge grid.sim_periods", s.step)
        steps.append(s.step)
        pos.append(xf)
    steps_a, pos_a = np.array(steps), np.array(pos)
    last = steps_a.max() if steps_a.size else 0
    start = max(last // 2, int(math.ceil(0.25 * last)))
    sel = (steps_a >= start) & np.isfinite(pos_a)
    speed, se = _ols_slope(steps_a[sel], pos_a[sel])
    return FrontTrace(float(theta), steps_a, pos_a, speed, se, int(start))


def _ols_slope(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if t.size < 2:
        return math.nan, math.nan
    tm = t - t.mean()
    sxx = float(np.dot(tm, tm))
    slope = float(np.dot(tm, y - y.mean()) / sxx)
    if t.size < 3:
        return slope, math.nan
    resid = y - y.mean() - slope * tm
    return slope, math.sqrt(float(np.dot(resid, resid)) / (t.size - 2) / sxx)


@dataclass(frozen=True, eq=False)
class WaveProfile:
    """Late states resampled in the moving frame xi = x - c n.

    ``U[m, j]`` and ``V[m, j]`` average the frame samples at ``xi[m]`` and
    ``x = theta[j] + k L`` over all periods ``k`` in the usable window
    (NaN where none fell). ``V`` is in transformed coordinates, ``q* - q``.
    ``monotonicity_defect`` is the largest increase of ``U`` in xi within one
    ``theta`` column. ``period_defect`` is the largest mismatch between the
    frame samples at ``(xi, x)`` and ``(xi, x + L)``, relative to
    ``max(p*, q*)``.
    """

    c: float
    xi: np.ndarray
    theta: np.ndarray
    U: np.ndarray
    V: np.ndarray
    counts: np.ndarray
    monotonicity_defect: float
    monotonicity_defect_v: float
    period_defect: float


def extract_profile(traj: Trajectory, c: float, margin_periods: int = 3) -> WaveProfile:
    """Resample the second half of ``traj`` in the frame moving at speed ``c``.

    A frame sample at ``(xi, x)`` is the state at the fractional step
    ``(x - xi) / c``, interpolated in time by monotone cubic Hermite
    polynomials through the recorded steps, at grid point ``x``. Only grid points at least ``margin_periods``
    periods away from both guard bands are used.

    Raises:
        InsufficientDataError: The usable steps span less than one period
            of travel, or the guard margins leave no window.
    """
    if not c > 0:
        raise InsufficientDataError("frame speed must be positive")
    dyn = traj.dynamics
    grid = dyn.grid
    h, L, n = grid.h, grid.L, grid.n
    states = sorted(traj.states, key=lambda s: s.step)
    if len(states) < 2:
        raise InsufficientDataError("trajectory needs at least two snapshots")
    last = states[-1].step
    late = [s for s in states if s.step >= last / 2]
    if len(late) < 2 or late[-1].step - late[0].step < L / c:
        span = late[-1].step - late[0].step if late else 0
        raise InsufficientDataError(
            f"the second half of the run spans {span} steps; at least L/c = {L / c:.3g} "
            "are needed to compare neighbouring periods")
    x = dyn.x
    lo_i = (1 + margin_periods) * n
    hi_i = x.size - (1 + margin_periods) * n
    if hi_i - lo_i < 2 * n:
        raise InsufficientDataError("domain too small for the requested guard margin")
    idx = np.arange(lo_i, hi_i)
    xs = x[idx]
    qs = grid.tile(dyn.q_star)
    steps = np.array([s.step for s in late], dtype=float)
    P = np.array([s.p for s in late])
    Vc = qs[None, :] - np.array([s.q for s in late])
    # monotone cubic Hermite slopes in time at every grid point
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        dP = PchipInterpolator(steps, P, axis=0).derivative()(steps)
        dV = PchipInterpolator(steps, Vc, axis=0).derivative()(steps)
    ms, iis, us, vs = [], [], [], []
    for k, (a, b) in enumerate(zip(late[:-1], late[1:])):
        # xi range swept by each x between steps a and b: (x - c b, x - c a]
        m_lo = np.floor((xs - c * b.step) / h).astype(np.int64) + 1
        m_hi = np.floor((xs - c * a.step) / h).astype(np.int64)
        count = np.maximum(m_hi - m_lo + 1, 0)
        rep_i = np.repeat(np.arange(idx.size), count)
        offs = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
        m = m_lo[rep_i] + offs
        t = ((xs[rep_i] - m * h) / c - a.step) / (b.step - a.step)
        gi = idx[rep_i]
        dt = b.step - a.step
        ms.append(m)
        iis.append(gi)
        us.append(_hermite(t, P[k, gi], P[k + 1, gi], dt * dP[k, gi], dt * dP[k + 1, gi]))
        vs.append(_hermite(t, Vc[k, gi], Vc[k + 1, gi], dt * dV[k, gi], dt * dV[k + 1, gi]))
    m = np.concatenate(ms)
    gi = np.concatenate(iis)
    u = np.concatenate(us)
    v = np.concatenate(vs)
    m0 = int(m.min())
    rows = m - m0
    nrows = int(rows.max()) + 1
    cls = gi % n
    cnt = np.zeros((nrows, n), dtype=np.int64)
    su = np.zeros((nrows, n))
    sv = np.zeros((nrows, n))
    np.add.at(cnt, (rows, cls), 1)
    np.add.at(su, (rows, cls), u)
    np.add.at(sv, (rows, cls), v)
    with np.errstate(invalid="ignore", divide="ignore"):
        U = np.where(cnt > 0, su / cnt, np.nan)
        V = np.where(cnt > 0, sv / cnt, np.nan)
    # pair each sample (xi, x) with (xi, x + L)
    width = x.size
    key = rows * width + gi
    order = np.argsort(key)
    skey = key[order]
    partner = key + n
    pos = np.searchsorted(skey, partner)
    pos = np.minimum(pos, skey.size - 1)
    hit = skey[pos] == partner
    scale = max(float(np.max(dyn.p_star)), float(np.max(dyn.q_star)))
    if np.any(hit):
        diff = np.abs(u[hit] - u[order[pos[hit]]])
        period_defect = float(diff.max()) / scale
    else:
        period_defect = math.nan
    xi = (m0 + np.arange(nrows)) * h
    return WaveProfile(float(c), xi, np.arange(n) * h, U, V, cnt, _max_increase(U),
                       _max_increase(V), period_defect)


def _hermite(t, y0, y1, d0, d1):
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1)


def _max_increase(A: np.ndarray) -> float:
    """Largest A[b, j] - A[a, j] over a < b, ignoring NaN cells."""
    worst = 0.0
    for j in range(A.shape[1]):
        col = A[:, j]
        col = col[np.isfinite(col)]
        if col.size < 2:
            continue
        run_min = np.minimum.accumulate(col)
        worst = max(worst, float(np.max(col[1:] - run_min[:-1])))
    return worst


def read_state_csv(path, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Load initial densities from a CSV with columns ``x,p,q`` on the simulation grid."""
    path = Path(path)
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ValidationError(f"cannot read initial state {path}: {exc}") from exc
    if data.dtype.names is None or tuple(data.dtype.names) != ("x", "p", "q"):
        raise SchemaError(f"{path}: expected columns 'x,p,q', got {data.dtype.names}")
    if data.size != x.size or np.max(np.abs(data["x"] - x)) > 1e-9 * max(1.0, abs(x[0])):
        raise ValidationError(f"{path}: x column does not match the simulation grid")
    p, q = np.asarray(data["p"], dtype=float), np.asarray(data["q"], dtype=float)
    if np.any(p < 0) or np.any(q < 0):
        raise ValidationError(f"{path}: densities must be nonnegative")
    return p, q

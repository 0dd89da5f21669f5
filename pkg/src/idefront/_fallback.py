"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_core.pyx``.
The two are interchangeable; ``idefront._backend`` picks one at import.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.special import erfc

NAME = "python"

KIND_GAUSSIAN = 0
KIND_LAPLACE = 1
KIND_TABLE = 2

# status codes returned by periodize_entries
OK = 0
NONDECREASING = 1
CAP_REACHED = 2

_SQRT2 = np.sqrt(2.0)
_GEOMETRIC_RTOL = 1e-9


def _lin_exp_integral(z0, dz, d0, slope, mu):
    """int_0^dz (d0 + slope*t) exp(mu*(z0 + t)) dt, elementwise."""
    z0 = np.asarray(z0, dtype=float)
    dz = np.asarray(dz, dtype=float)
    x = mu * dz
    small = np.abs(x) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        e1 = np.where(small, dz * (1 + x / 2 + x**2 / 6 + x**3 / 24 + x**4 / 120),
                      np.expm1(x) / mu)
        e2 = np.where(small, dz**2 * (0.5 + x / 3 + x**2 / 8 + x**3 / 30 + x**4 / 144),
                      (dz * np.exp(x) - e1) / mu)
    return np.exp(mu * z0) * (d0 * e1 + slope * e2)


def table_cumulative(nodes, dens, mu):
    """Cumulative int_{z_0}^{z_s} k(t) exp(mu t) dt at each table node."""
    nodes = np.asarray(nodes, dtype=float)
    dens = np.asarray(dens, dtype=float)
    dz = np.diff(nodes)
    slope = np.diff(dens) / dz
    seg = _lin_exp_integral(nodes[:-1], dz, dens[:-1], slope, mu)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _table_antiderivative(z, nodes, dens, cum, mu):
    z = np.asarray(z, dtype=float)
    z0, zk = nodes[0], nodes[-1]
    step = nodes[1] - nodes[0]
    zc = np.clip(z, z0, zk)
    s = np.clip(np.floor((zc - z0) / step).astype(np.int64), 0, len(nodes) - 2)
    slope = (dens[s + 1] - dens[s]) / step
    part = _lin_exp_integral(nodes[s], zc - nodes[s], dens[s], slope, mu)
    return cum[s] + part


def weighted_cell(kind, par, nodes, dens, cum, mu, a, b):
    """Exact int_a^b k(z) exp(mu z) dz, elementwise over arrays a < b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if kind == KIND_GAUSSIAN:
        s2 = par
        sig = np.sqrt(s2)
        c = mu * s2
        lo = (a - c) / (sig * _SQRT2)
        hi = (b - c) / (sig * _SQRT2)
        right = 0.5 * (erfc(lo) - erfc(hi))
        left = 0.5 * (erfc(-hi) - erfc(-lo))
        mid = 1.0 - 0.5 * (erfc(-lo) + erfc(hi))
        diff = np.where(lo >= 0, right, np.where(hi <= 0, left, mid))
        return np.exp(0.5 * s2 * mu * mu) * diff
    if kind == KIND_LAPLACE:
        scale = par
        alpha = 1.0 / scale - mu
        beta = 1.0 / scale + mu
        lo = np.maximum(a, 0.0)
        right = np.where(b > 0, np.exp(-alpha * lo) * -np.expm1(-alpha * (b - lo))
                         / (2 * scale * alpha), 0.0)
        hi = np.minimum(b, 0.0)
        left = np.where(a < 0, np.exp(beta * hi) * -np.expm1(-beta * (hi - a))
                        / (2 * scale * beta), 0.0)
        return right + left
    return (_table_antiderivative(b, nodes, dens, cum, mu)
            - _table_antiderivative(a, nodes, dens, cum, mu))


def weighted_point(kind, par, nodes, dens, mu, z):
    """k(z) exp(mu z), elementwise."""
    z = np.asarray(z, dtype=float)
    if kind == KIND_GAUSSIAN:
        s2 = par
        return np.exp(-z * z / (2 * s2) + mu * z - 0.5 * np.log(2 * np.pi * s2))
    if kind == KIND_LAPLACE:
        scale = par
        return np.exp(-np.abs(z) / scale + mu * z) / (2 * scale)
    return np.interp(z, nodes, dens, left=0.0, right=0.0) * np.exp(mu * z)


def periodize_entries(kind, par, nodes, dens, cum, d, L, h, mu, zbar, cell, rtol, cap):
    """Image sums F(d) = sum_m w(d - m L) for each displacement in ``d``.

    ``w`` is the cell mass divided by ``h`` (``cell=True``) or the point value
    of k(z) exp(mu z). Images are summed outward from the one nearest the
    weighted kernel's mode, separately in each direction, and an entry stops
    once the geometric bound on its remaining tail is below ``rtol`` times its
    running total. An exactly geometric tail (detected from two equal
    successive ratios) is added in closed form.

    Returns:
        (F, status) with status OK, NONDECREASING or CAP_REACHED.
    """
    d = np.asarray(d, dtype=float)
    total = np.zeros_like(d)
    z_start = d - np.floor((d - zbar) / L) * L
    for step in (L, -L):
        z = z_start.copy() if step > 0 else z_start - L
        active = np.ones(d.shape, dtype=bool)
        prev = np.full(d.shape, np.nan)
        prev_ratio = np.full(d.shape, np.nan)
        rises = np.zeros(d.shape, dtype=np.int64)
        for _ in range(cap):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            zi = z[idx]
            if cell:
                t = weighted_cell(kind, par, nodes, dens, cum, mu, zi - h / 2, zi + h / 2) / h
            else:
                t = weighted_point(kind, par, nodes, dens, mu, zi)
            total[idx] += t
            p = prev[idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = t / p
            has_ratio = np.isfinite(ratio) & (p > 0)
            rising = has_ratio & (ratio >= 1.0) & (t > 0)
            rises[idx] = np.where(rising, rises[idx] + 1, 0)
            if np.any(rises[idx] >= 3):
                return total, NONDECREASING
            pr = prev_ratio[idx]
            falling = has_ratio & (ratio < 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                tail = t * ratio / (1.0 - ratio)
            geometric = falling & np.isfinite(pr) & (np.abs(ratio - pr) <= _GEOMETRIC_RTOL * ratio)
            total[idx] += np.where(geometric, tail, 0.0)
            done = (t == 0) | geometric | (falling & (tail <= rtol * total[idx]))
            active[idx[done]] = False
            prev[idx] = t
            prev_ratio[idx] = np.where(has_ratio, ratio, np.nan)
            z[idx] += step
        else:
            if np.any(active):
                return total, CAP_REACHED
    return total, OK


def power_iterate(A, phi0, rtol, res_tol, max_iter):
    """Max-norm power iteration.

    Returns:
        (lam, phi, residual, iterations, converged). ``residual`` is
        max|A phi - lam phi| for the returned ``phi`` (max phi == 1).
    """
    A = np.ascontiguousarray(A, dtype=float)
    phi = np.array(phi0, dtype=float)
    phi /= phi.max()
    lam_prev = np.nan
    lam = res = np.nan
    for it in range(1, max_iter + 1):
        y = A @ phi
        lam = y.max()
        res = np.abs(y - lam * phi).max()
        if it > 1 and abs(lam - lam_prev) <= rtol * lam and res <= res_tol * lam:
            return float(lam), phi, float(res), it, True
        lam_prev = lam
        phi = y / lam
    return float(lam), phi, float(res), max_iter, False


def growth_competitive(p, q, r1, b1, a1, r2, b2, a2):
    """Pre-dispersal Beverton-Holt terms of the competitive system."""
    g1 = r1 * p / (1.0 + b1 * (p + a1 * q))
    g2 = r2 * q / (1.0 + b2 * (q + a2 * p))
    return g1, g2


def growth_cooperative(u, v, qs, r1, b1, a1, r2, b2, a2):
    """Pre-dispersal terms of the cooperative system u = p, v = q* - q."""
    g1 = r1 * u / (1.0 + b1 * (u + a1 * (qs - v)))
    g2 = (r2 / (1.0 + b2 * qs)) * (b2 * a2 * qs * u + v) / (1.0 + b2 * (qs + a2 * u - v))
    return g1, g2


def convolve_valid(x, w):
    """Direct linear convolution keeping only fully overlapped outputs."""
    return np.convolve(x, w, mode="valid")


def convolve_rows_valid(X, w):
    """Row-wise :func:`convolve_valid` for a 2-D array."""
    X = np.asarray(X, dtype=float)
    s = (len(w) - 1) // 2
    full = ndimage.convolve1d(X, w, axis=1, mode="constant", cval=0.0)
    return np.ascontiguousarray(full[:, s:X.shape[1] - s])


def shift_rows_max(A, shift, floor):
    """out[j] = max(floor[j], A interpolated at row j + shift).

    Rows beyond either end of ``A`` are replaced by the nearest edge row.
    """
    A = np.asarray(A, dtype=float)
    rows = A.shape[0]
    t = np.clip(np.arange(rows) + shift, 0.0, rows - 1.0)
    j0 = np.minimum(np.floor(t).astype(np.int64), rows - 1)
    j1 = np.minimum(j0 + 1, rows - 1)
    f = (t - j0)[:, None]
    out = (1.0 - f) * A[j0] + f * A[j1]
    return np.maximum(out, floor)

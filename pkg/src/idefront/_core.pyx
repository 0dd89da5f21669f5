# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Signatures and results match ``idefront._fallback`` function by function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, erfc, sqrt, log, floor, fabs, M_PI, INFINITY
from scipy.linalg.cython_blas cimport daxpy, ddot, dgemv

cnp.import_array()

NAME = "cython"

KIND_GAUSSIAN = 0
KIND_LAPLACE = 1
KIND_TABLE = 2

OK = 0
NONDECREASING = 1
CAP_REACHED = 2

cdef double SQRT2 = sqrt(2.0)
cdef double GEOMETRIC_RTOL = 1e-9


cdef inline double lin_exp_integral(double z0, double dz, double d0, double slope,
                                    double mu) noexcept nogil:
    cdef double x = mu * dz
    cdef double e1, e2
    if fabs(x) < 1e-3:
        e1 = dz * (1 + x / 2 + x * x / 6 + x * x * x / 24 + x * x * x * x / 120)
        e2 = dz * dz * (0.5 + x / 3 + x * x / 8 + x * x * x / 30 + x * x * x * x / 144)
    else:
        e1 = expm1(x) / mu
        e2 = (dz * exp(x) - e1) / mu
    return exp(mu * z0) * (d0 * e1 + slope * e2)


cdef inline double table_anti(double z, const double[::1] nodes, const double[::1] dens,
                              const double[::1] cum, double mu) noexcept nogil:
    cdef Py_ssize_t k = nodes.shape[0]
    cdef double z0 = nodes[0]
    cdef double step = nodes[1] - nodes[0]
    cdef double zc = z
    cdef Py_ssize_t s
    if zc < z0:
        zc = z0
    if zc > nodes[k - 1]:
        zc = nodes[k - 1]
    s = <Py_ssize_t>floor((zc - z0) / step)
    if s < 0:
        s = 0
    if s > k - 2:
        s = k - 2
    return cum[s] + lin_exp_integral(nodes[s], zc - nodes[s], dens[s],
                                     (dens[s + 1] - dens[s]) / step, mu)


cdef inline double cell_mass(int kind, double par, const double[::1] nodes,
                             const double[::1] dens, const double[::1] cum,
                             double mu, double a, double b) noexcept nogil:
    cdef double sig, c, lo, hi, diff, alpha, beta, out
    if kind == 0:
        sig = sqrt(par)
        c = mu * par
        lo = (a - c) / (sig * SQRT2)
        hi = (b - c) / (sig * SQRT2)
        if lo >= 0:
            diff = 0.5 * (erfc(lo) - erfc(hi))
        elif hi <= 0:
            diff = 0.5 * (erfc(-hi) - erfc(-lo))
        else:
            diff = 1.0 - 0.5 * (erfc(-lo) + erfc(hi))
        return exp(0.5 * par * mu * mu) * diff
    if kind == 1:
        alpha = 1.0 / par - mu
        beta = 1.0 / par + mu
        out = 0.0
        if b > 0:
            lo = a if a > 0 else 0.0
            out += exp(-alpha * lo) * -expm1(-alpha * (b - lo)) / (2 * par * alpha)
        if a < 0:
            hi = b if b < 0 else 0.0
            out += exp(beta * hi) * -expm1(-beta * (hi - a)) / (2 * par * beta)
        return out
    return table_anti(b, nodes, dens, cum, mu) - table_anti(a, nodes, dens, cum, mu)


cdef inline double point_value(int kind, double par, const double[::1] nodes,
                               const double[::1] dens, double mu, double z) noexcept nogil:
    cdef Py_ssize_t k, s
    cdef double step, f
    if kind == 0:
        return exp(-z * z / (2 * par) + mu * z - 0.5 * log(2 * M_PI * par))
    if kind == 1:
        return exp(-fabs(z) / par + mu * z) / (2 * par)
    k = nodes.shape[0]
    if z < nodes[0] or z > nodes[k - 1]:
        return 0.0
    step = nodes[1] - nodes[0]
    s = <Py_ssize_t>floor((z - nodes[0]) / step)
    if s > k - 2:
        s = k - 2
    f = (z - nodes[s]) / step
    return ((1 - f) * dens[s] + f * dens[s + 1]) * exp(mu * z)


def table_cumulative(nodes, dens, double mu):
    cdef const double[::1] nv = np.ascontiguousarray(nodes, dtype=float)
    cdef const double[::1] dv = np.ascontiguousarray(dens, dtype=float)
    cdef Py_ssize_t k = nv.shape[0], s
    out = np.zeros(k)
    cdef double[::1] ov = out
    for s in range(k - 1):
        ov[s + 1] = ov[s] + lin_exp_integral(nv[s], nv[s + 1] - nv[s], dv[s],
                                             (dv[s + 1] - dv[s]) / (nv[s + 1] - nv[s]), mu)
    return out


def _as_table(nodes, dens, cum):
    if nodes is None:
        z = np.zeros(2)
        return z, z, z
    return (np.ascontiguousarray(nodes, dtype=float), np.ascontiguousarray(dens, dtype=float),
            np.ascontiguousarray(cum, dtype=float) if cum is not None else np.zeros(len(nodes)))


def weighted_cell(int kind, double par, nodes, dens, cum, double mu, a, b):
    """Exact int_a^b k(z) exp(mu z) dz, elementwise over arrays a < b."""
    nodes, dens, cum = _as_table(nodes, dens, cum)
    cdef const double[::1] nv = nodes, dv = dens, cv = cum
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a_arr.shape
    cdef const double[::1] av = np.ascontiguousarray(a_arr).ravel()
    cdef const double[::1] bv = np.ascontiguousarray(b_arr).ravel()
    out = np.empty(av.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(av.shape[0]):
        ov[i] = cell_mass(kind, par, nv, dv, cv, mu, av[i], bv[i])
    return out.reshape(shape)


def weighted_point(int kind, double par, nodes, dens, double mu, z):
    """k(z) exp(mu z), elementwise."""
    nodes, dens, _ = _as_table(nodes, dens, None)
    cdef const double[::1] nv = nodes, dv = dens
    z_arr = np.asarray(z, dtype=float)
    shape = z_arr.shape
    cdef const double[::1] zv = np.ascontiguousarray(z_arr).ravel()
    out = np.empty(zv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(zv.shape[0]):
        ov[i] = point_value(kind, par, nv, dv, mu, zv[i])
    return out.reshape(shape)


def periodize_entries(int kind, double par, nodes, dens, cum, d, double L, double h,
                      double mu, double zbar, bint cell, double rtol, int cap):
    """Image sums F(d) = sum_m w(d - m L); see the pure-Python twin."""
    nodes, dens, cum = _as_table(nodes, dens, cum)
    cdef const double[::1] nv = nodes, dv = dens, cv = cum
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=float).ravel()
    cdef Py_ssize_t n = dd.shape[0], i
    total = np.zeros(n)
    cdef double[::1] tv = total
    cdef double z, t, prev, ratio, prev_ratio, tail, step, zs, acc
    cdef int it, rises, direction
    cdef bint has_prev, has_ratio
    cdef int status = 0
    with nogil:
        for i in range(n):
            zs = dd[i] - floor((dd[i] - zbar) / L) * L
            acc = 0.0
            for direction in range(2):
                if direction == 0:
                    step = L
                    z = zs
                else:
                    step = -L
                    z = zs - L
                has_prev = False
                has_ratio = False
                prev = 0.0
                prev_ratio = 0.0
                rises = 0
                it = 0
                while True:
                    if it >= cap:
                        status = 2
                        break
                    it += 1
                    if cell:
                        t = cell_mass(kind, par, nv, dv, cv, mu, z - h / 2, z + h / 2) / h
                    else:
                        t = point_value(kind, par, nv, dv, mu, z)
                    acc += t
                    if t == 0:
                        break
                    if has_prev and prev > 0:
                        ratio = t / prev
                        if ratio >= 1.0:
                            rises += 1
                            if rises >= 3:
                                status = 1
                                break
                        else:
                            rises = 0
                            tail = t * ratio / (1.0 - ratio)
                            if has_ratio and fabs(ratio - prev_ratio) <= GEOMETRIC_RTOL * ratio:
                                acc += tail
                                break
                            if tail <= rtol * acc:
                                break
                        prev_ratio = ratio
                        has_ratio = True
                    prev = t
                    has_prev = True
                    z += step
                if status != 0:
                    break
            tv[i] = acc
            if status != 0:
                break
    return total.reshape(np.shape(d)), status


def power_iterate(A, phi0, double rtol, double res_tol, int max_iter):
    """Max-norm power iteration; see the pure-Python twin."""
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=float)
    cdef int n = Av.shape[0]
    phi = np.array(phi0, dtype=float)
    cdef double[::1] pv = phi
    y = np.empty(n)
    cdef double[::1] yv = y
    cdef double lam = 0.0, lam_prev = 0.0, res = 0.0, mx, alpha = 1.0, beta = 0.0
    cdef int it, i, inc = 1
    cdef char trans = b'T'
    mx = -INFINITY
    for i in range(n):
        if pv[i] > mx:
            mx = pv[i]
    for i in range(n):
        pv[i] /= mx
    with nogil:
        for it in range(1, max_iter + 1):
            dgemv(&trans, &n, &n, &alpha, <double*>&Av[0, 0], &n, &pv[0], &inc, &beta, &yv[0], &inc)
            lam = -INFINITY
            for i in range(n):
                if yv[i] > lam:
                    lam = yv[i]
            res = 0.0
            for i in range(n):
                mx = fabs(yv[i] - lam * pv[i])
                if mx > res:
                    res = mx
            if it > 1 and fabs(lam - lam_prev) <= rtol * lam and res <= res_tol * lam:
                break
            lam_prev = lam
            for i in range(n):
                pv[i] = yv[i] / lam
    converged = it > 1 and fabs(lam - lam_prev) <= rtol * lam and res <= res_tol * lam
    return float(lam), phi, float(res), (it if converged else max_iter), bool(converged)


def _coeffs(n, *arrays):
    out = []
    for a in arrays:
        if not (isinstance(a, np.ndarray) and a.dtype == np.float64 and a.size == n
                and a.flags.c_contiguous):
            a = np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=float), (n,)))
        out.append(a.ravel())
    return out


def growth_competitive(p, q, r1, b1, a1, r2, b2, a2):
    """Pre-dispersal Beverton-Holt terms of the competitive system.

    Coefficients may be scalars or arrays matching ``p``.
    """
    pa = np.ascontiguousarray(p, dtype=float)
    shape = pa.shape
    cdef Py_ssize_t n = pa.size, i
    cdef const double[::1] pv = pa.ravel()
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=float).ravel()
    cr1, cb1, ca1, cr2, cb2, ca2 = _coeffs(n, r1, b1, a1, r2, b2, a2)
    cdef const double[::1] R1 = cr1, B1 = cb1, A1 = ca1, R2 = cr2, B2 = cb2, A2 = ca2
    g1 = np.empty(n)
    g2 = np.empty(n)
    cdef double[::1] o1 = g1, o2 = g2
    with nogil:
        for i in range(n):
            o1[i] = R1[i] * pv[i] / (1.0 + B1[i] * (pv[i] + A1[i] * qv[i]))
            o2[i] = R2[i] * qv[i] / (1.0 + B2[i] * (qv[i] + A2[i] * pv[i]))
    return g1.reshape(shape), g2.reshape(shape)


def growth_cooperative(u, v, qs, r1, b1, a1, r2, b2, a2):
    """Pre-dispersal terms of the cooperative system u = p, v = q* - q."""
    ua = np.ascontiguousarray(u, dtype=float)
    shape = ua.shape
    cdef Py_ssize_t n = ua.size, i
    cdef const double[::1] uv = ua.ravel()
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=float).ravel()
    cqs, cr1, cb1, ca1, cr2, cb2, ca2 = _coeffs(n, qs, r1, b1, a1, r2, b2, a2)
    cdef const double[::1] QS = cqs, R1 = cr1, B1 = cb1, A1 = ca1, R2 = cr2, B2 = cb2, A2 = ca2
    g1 = np.empty(n)
    g2 = np.empty(n)
    cdef double[::1] o1 = g1, o2 = g2
    with nogil:
        for i in range(n):
            o1[i] = R1[i] * uv[i] / (1.0 + B1[i] * (uv[i] + A1[i] * (QS[i] - vv[i])))
            o2[i] = ((R2[i] / (1.0 + B2[i] * QS[i])) * (B2[i] * A2[i] * QS[i] * uv[i] + vv[i])
                     / (1.0 + B2[i] * (QS[i] + A2[i] * uv[i] - vv[i])))
    return g1.reshape(shape), g2.reshape(shape)


cdef void conv_valid_dot(const double* x, Py_ssize_t nx, const double* wr, Py_ssize_t nw,
                         double* out) noexcept nogil:
    # wr is the kernel reversed, so every output is one BLAS dot product;
    # best when the row is long
    cdef Py_ssize_t i, nout = nx - nw + 1
    cdef int n = <int>nw, one = 1
    for i in range(nout):
        out[i] = ddot(&n, <double*>wr, &one, <double*>(x + i), &one)


cdef void conv_valid_axpy(const double* x, Py_ssize_t nx, const double* wr, Py_ssize_t nw,
                          double* out) noexcept nogil:
    # one shifted copy of x per tap; best for short rows with many taps
    cdef Py_ssize_t i, k, nout = nx - nw + 1
    cdef int n = <int>nout, one = 1
    cdef double wk
    for i in range(nout):
        out[i] = 0.0
    for k in range(nw):
        wk = wr[k]
        daxpy(&n, &wk, <double*>(x + k), &one, out, &one)


def convolve_valid(x, w):
    """Direct linear convolution keeping only fully overlapped outputs."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef const double[::1] wv = np.ascontiguousarray(np.asarray(w, dtype=float)[::-1])
    cdef Py_ssize_t nx = xv.shape[0], nw = wv.shape[0]
    out = np.empty(nx - nw + 1)
    cdef double[::1] ov = out
    with nogil:
        conv_valid_dot(&xv[0], nx, &wv[0], nw, &ov[0])
    return out


def convolve_rows_valid(X, w):
    """Row-wise :func:`convolve_valid` for a 2-D array."""
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=float)
    cdef const double[::1] wv = np.ascontiguousarray(np.asarray(w, dtype=float)[::-1])
    cdef Py_ssize_t rows = xv.shape[0], nx = xv.shape[1], nw = wv.shape[0], j
    out = np.empty((rows, nx - nw + 1))
    cdef double[:, ::1] ov = out
    with nogil:
        for j in range(rows):
            conv_valid_axpy(&xv[j, 0], nx, &wv[0], nw, &ov[j, 0])
    return out


def shift_rows_max(A, double shift, floor_):
    """out[j] = max(floor[j], A interpolated at row j + shift)."""
    cdef const double[:, ::1] av = np.ascontiguousarray(A, dtype=float)
    cdef Py_ssize_t rows = av.shape[0], cols = av.shape[1], j, c, j0, j1
    fl = np.broadcast_to(np.asarray(floor_, dtype=float), (rows, cols))
    cdef const double[:, ::1] fv = np.ascontiguousarray(fl)
    out = np.empty((rows, cols))
    cdef double[:, ::1] ov = out
    cdef double t, f, val
    with nogil:
        for j in range(rows):
            t = j + shift
            if t < 0:
                t = 0
            if t > rows - 1:
                t = rows - 1
            j0 = <Py_ssize_t>floor(t)
            if j0 > rows - 1:
                j0 = rows - 1
            j1 = j0 + 1 if j0 + 1 < rows else rows - 1
            f = t - j0
            for c in range(cols):
                val = (1.0 - f) * av[j0, c] + f * av[j1, c]
                ov[j, c] = val if val > fv[j, c] else fv[j, c]
    return out

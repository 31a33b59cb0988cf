# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""
Compiled numerical core.

C transcription of :mod:`ebacktest._core_python`; every public function has
the same signature and returns bit-compatible results for the wealth
recursion (both use the C library ``log1p``).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, exp, sqrt, lgamma, fabs, tanh, fmin, fmax, INFINITY, M_PI

cnp.import_array()

IMPLEMENTATION = "cython"

DIST_NORMAL = 0
DIST_STUDENT_T = 1
DIST_SKEWED_T = 2

cdef double ZERO_TOL = 1e-12
cdef double GOLDEN = 0.6180339887498949


cdef inline double _ident(int code, double x, double r, double z, double p, double m) noexcept nogil:
    cdef double d, w
    if code == 0:
        return x / r - 1.0
    elif code == 1:
        return (x - r) / (m + r)
    elif code == 2:
        return (x - r) / (m - r)
    elif code == 3:
        return (1.0 / (1.0 - p) if x > r else 0.0) - 1.0
    elif code == 4:
        return 1.0 - (1.0 / p if x <= r else 0.0)
    elif code == 5:
        d = x - z
        if d < 0.0:
            d = 0.0
        return d / ((1.0 - p) * (r - z)) - 1.0
    elif code == 6:
        w = p if x > r else 1.0 - p
        return w * (x / r - 1.0)
    elif code == 7:
        w = p if x > r else 1.0 - p
        return w * (x - r) / ((1.0 - p) * (m + r))
    elif code == 8:
        w = p if x > r else 1.0 - p
        return w * (x - r) / (p * (m - r))
    elif code == 9:
        d = x - z
        return d * d / r - 1.0
    elif code == 10:
        d = x - z
        w = p if d > 0.0 else 1.0 - p
        return w * d * d / r - 1.0
    return 0.0


cdef inline double _score(int code, double x, double r, double z, double p) noexcept nogil:
    cdef double d, sr, u, tail
    if code == 20:
        d = x - r
        return d * d
    elif code == 21:
        return z * (z - 2.0 * x) + r * (r - 2.0 * x * x)
    elif code == 22:
        d = x - r
        return (1.0 - p) * r + (d if d > 0.0 else 0.0)
    elif code == 23:
        tail = log(x / r) if x > r else 0.0
        return (1.0 - p) * log(r) + tail
    elif code == 24:
        sr = 2.0 * sqrt(r)
        d = x - z
        if d < 0.0:
            d = 0.0
        return d / sr + (1.0 - p) * (r + z) / sr
    elif code == 25:
        d = x - z
        if d < 0.0:
            d = 0.0
        return d / r + (1.0 - p) * (z / r - 1.0 + log(r))
    elif code == 26:
        d = x - r
        tail = (1.0 - 2.0 * p) * d * d if d > 0.0 else 0.0
        return -tail + (1.0 - p) * r * (r - 2.0 * x)
    elif code == 27:
        u = x / r
        tail = log(u) + 1.0 - u if x > r else 0.0
        return (1.0 - 2.0 * p) * tail + (1.0 - p) * (log(r) - 1.0 + u)
    return 0.0


cdef inline double _payoff(int code, double x, double r, double z, double rs, double zs,
                           double p, double m, double sign) noexcept nogil:
    if code < 20:
        return sign * _ident(code, x, r, z, p, m)
    return sign * (_score(code, x, r, z, p) - _score(code, x, rs, zs, p))


def payoffs(int code, double p, double m, const double[::1] x, const double[::1] r, const double[::1] z,
            const double[::1] rs, const double[::1] zs, double sign):
    cdef Py_ssize_t n = x.shape[0], t
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for t in range(n):
            o[t] = _payoff(code, x[t], r[t], z[t], rs[t], zs[t], p, m, sign)
    return out


def history_moments(int code, double p, double m, const double[::1] x,
                    const cnp.int64_t[::1] lo, const cnp.int64_t[::1] hi,
                    const double[::1] r, const double[::1] z, const double[::1] rs, const double[::1] zs,
                    double sign):
    cdef Py_ssize_t n = lo.shape[0], t, s
    cdef double g, a1, a2, rt, zt, rst, zst
    s1_arr = np.zeros(n)
    s2_arr = np.zeros(n)
    cdef double[::1] s1 = s1_arr
    cdef double[::1] s2 = s2_arr
    with nogil:
        for t in range(n):
            a1 = 0.0
            a2 = 0.0
            rt = r[t]
            zt = z[t]
            rst = rs[t]
            zst = zs[t]
            for s in range(lo[t], hi[t]):
                g = _payoff(code, x[s], rt, zt, rst, zst, p, m, sign)
                a1 += g
                a2 += g * g
            s1[t] = a1
            s2[t] = a2
    return s1_arr, s2_arr


cdef double _log_growth(const double[::1] g, Py_ssize_t n, double lam) noexcept nogil:
    cdef double acc = 0.0, f
    cdef Py_ssize_t i
    for i in range(n):
        f = 1.0 + lam * g[i]
        if f <= 0.0:
            return -INFINITY
        acc += log(f)
    return acc


cdef double _grel_argmax(const double[::1] g, Py_ssize_t n, double cap, double tol) noexcept nogil:
    cdef double tot = 0.0, dcap = 0.0, f, a, b, c, d, fc, fd, lam
    cdef Py_ssize_t i
    cdef bint feasible = True
    if n == 0 or cap <= 0.0:
        return 0.0
    for i in range(n):
        tot += g[i]
    if tot <= 0.0:
        return 0.0
    for i in range(n):
        f = 1.0 + cap * g[i]
        if f <= 0.0:
            feasible = False
            break
        dcap += g[i] / f
    if feasible and dcap >= 0.0:
        return cap
    a = 0.0
    b = cap
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = _log_growth(g, n, c)
    fd = _log_growth(g, n, d)
    while b - a > tol:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = b - GOLDEN * (b - a)
            fc = _log_growth(g, n, c)
        else:
            a = c
            c = d
            fc = fd
            d = a + GOLDEN * (b - a)
            fd = _log_growth(g, n, d)
    lam = 0.5 * (a + b)
    if _log_growth(g, n, lam) < 0.0:
        return 0.0
    return lam


def grel_argmax(g, double cap, double tol):
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=float)
    return _grel_argmax(gv, gv.shape[0], cap, tol)


def history_grel(int code, double p, double m, const double[::1] x,
                 const cnp.int64_t[::1] lo, const cnp.int64_t[::1] hi,
                 const double[::1] r, const double[::1] z, const double[::1] rs, const double[::1] zs,
                 double sign, const double[::1] cap, double tol):
    cdef Py_ssize_t n = lo.shape[0], t, s, k, width = 0
    for t in range(n):
        if hi[t] - lo[t] > width:
            width = hi[t] - lo[t]
    buf_arr = np.empty(max(width, 1))
    cdef double[::1] buf = buf_arr
    lam_arr = np.zeros(n)
    cdef double[::1] lam = lam_arr
    with nogil:
        for t in range(n):
            k = 0
            for s in range(lo[t], hi[t]):
                buf[k] = _payoff(code, x[s], r[t], z[t], rs[t], zs[t], p, m, sign)
                k += 1
            if k > 0:
                lam[t] = _grel_argmax(buf, k, cap[t], tol)
    return lam_arr


cdef inline int _step_log(double *log_w, double lam, double g) noexcept nogil:
    cdef double f = 1.0 + lam * g
    if f < 0.0:
        if f > -ZERO_TOL:
            f = 0.0
        else:
            return -1
    if f == 0.0:
        log_w[0] = -INFINITY
    else:
        log_w[0] = log_w[0] + log1p(lam * g)
    return 0


def wealth_path(const double[::1] lam, const double[::1] g, const cnp.uint8_t[::1] reset_before, double threshold):
    cdef Py_ssize_t n = g.shape[0], t
    cdef long s = 0
    cdef double log_w = 0.0
    cdef bint pending = False
    cdef bint use_thr = threshold < INFINITY
    cdef long bad = -1
    out_arr = np.empty(n)
    seg_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] out = out_arr
    cdef cnp.int64_t[::1] seg = seg_arr
    with nogil:
        for t in range(n):
            if t > 0 and (reset_before[t] or pending):
                log_w = 0.0
                s += 1
            pending = False
            if _step_log(&log_w, lam[t], g[t]) < 0:
                bad = t
                break
            out[t] = log_w
            seg[t] = s
            if use_thr and exp(log_w) >= threshold:
                pending = True
    if bad >= 0:
        raise ArithmeticError(bad)
    return out_arr, seg_arr


def wealth_pair_path(const double[::1] lam1, const double[::1] g1, const double[::1] lam2, const double[::1] g2,
                     const cnp.uint8_t[::1] reset_before, double threshold, int mix=0):
    cdef Py_ssize_t n = g1.shape[0], t
    cdef long s = 0
    cdef double w1 = 0.0, w2 = 0.0
    cdef bint pending = False
    cdef bint use_thr = threshold < INFINITY
    cdef long bad = -1
    out1_arr = np.empty(n)
    out2_arr = np.empty(n)
    seg_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] out1 = out1_arr
    cdef double[::1] out2 = out2_arr
    cdef cnp.int64_t[::1] seg = seg_arr
    with nogil:
        for t in range(n):
            if t > 0 and (reset_before[t] or pending):
                w1 = 0.0
                w2 = 0.0
                s += 1
            pending = False
            if _step_log(&w1, lam1[t], g1[t]) < 0 or _step_log(&w2, lam2[t], g2[t]) < 0:
                bad = t
                break
            out1[t] = w1
            out2[t] = w2
            seg[t] = s
            if use_thr:
                if mix:
                    pending = 0.5 * (exp(w1) + exp(w2)) >= threshold
                else:
                    pending = exp(w1) >= threshold or exp(w2) >= threshold
    if bad >= 0:
        raise ArithmeticError(bad)
    return out1_arr, out2_arr, seg_arr


def garch_filter(x, double phi0, double phi1, double a0, double a1, double b1, double s2init):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef Py_ssize_t n = xv.shape[0] - 1, t
    if n < 0:
        n = 0
    eps_arr = np.empty(n)
    s2_arr = np.empty(n)
    cdef double[::1] eps = eps_arr
    cdef double[::1] s2 = s2_arr
    with nogil:
        for t in range(n):
            eps[t] = xv[t + 1] - phi0 - phi1 * xv[t]
            if t == 0:
                s2[t] = s2init
            else:
                s2[t] = a0 + a1 * eps[t - 1] * eps[t - 1] + b1 * s2[t - 1]
    return eps_arr, s2_arr


cdef double _nll(const double[::1] xv, double phi0, double phi1, double a0, double a1,
                 double b1, double s2, int dist, double nu, double gam) noexcept nogil:
    cdef Py_ssize_t n = xv.shape[0] - 1, t
    cdef double e, e_prev = 0.0, zs, u, ll = 0.0
    cdef double c_t = 0.0, sc = 1.0, mean = 0.0, sd = 1.0, lnorm = 0.0, xs, m1, ex2
    if dist != 0:
        c_t = lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * log(nu * M_PI)
    if dist == 1:
        sc = sqrt((nu - 2.0) / nu)
        lnorm = c_t - log(sc)
    elif dist == 2:
        m1 = 2.0 * exp(c_t) * nu / (nu - 1.0)
        mean = m1 * (gam - 1.0 / gam)
        ex2 = (gam * gam * gam + 1.0 / (gam * gam * gam)) / (gam + 1.0 / gam) * nu / (nu - 2.0)
        sd = sqrt(ex2 - mean * mean)
        lnorm = log(2.0 / (gam + 1.0 / gam)) + log(sd) + c_t
    for t in range(n):
        e = xv[t + 1] - phi0 - phi1 * xv[t]
        if t > 0:
            s2 = a0 + a1 * e_prev * e_prev + b1 * s2
        if s2 <= 0.0:
            return INFINITY
        zs = e / sqrt(s2)
        if dist == 0:
            ll += -0.5 * log(2.0 * M_PI) - 0.5 * zs * zs
        elif dist == 1:
            u = zs / sc
            ll += lnorm - 0.5 * (nu + 1.0) * log1p(u * u / nu)
        else:
            xs = mean + sd * zs
            u = xs / gam if xs >= 0.0 else xs * gam
            ll += lnorm - 0.5 * (nu + 1.0) * log1p(u * u / nu)
        ll -= 0.5 * log(s2)
        e_prev = e
    return -ll


def garch_nll(x, double phi0, double phi1, double a0, double a1, double b1, double s2init,
              int dist, double nu, double gam):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef double out
    with nogil:
        out = _nll(xv, phi0, phi1, a0, a1, b1, s2init, dist, nu, gam)
    return out


# unconstrained optimiser coordinates -> AR-GARCH parameters
cdef double PERSIST_MAX = 0.9999
cdef double PHI_MAX = 0.999
cdef double NU_MIN = 2.05
cdef double NU_MAX = 200.0


cdef inline double _expit(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


cdef inline void _unpack(const double[::1] th, int dist, double scale, double* out) noexcept nogil:
    cdef double pers, share
    out[0] = th[0] * scale
    out[1] = PHI_MAX * tanh(th[1])
    out[2] = exp(th[2]) * scale * scale
    pers = PERSIST_MAX * _expit(th[3])
    share = _expit(th[4])
    out[3] = pers * share
    out[4] = pers * (1.0 - share)
    out[5] = INFINITY
    out[6] = 1.0
    if dist >= 1:
        out[5] = NU_MIN + fmin(exp(th[5]), NU_MAX)
    if dist == 2:
        out[6] = exp(fmin(fmax(th[6], -5.0), 5.0))


def unpack_theta(theta, int dist, double scale):
    """``(phi0, phi1, alpha0, alpha1, beta1, nu, gamma)`` from optimiser coordinates."""
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=float)
    cdef double out[7]
    _unpack(th, dist, scale, out)
    return out[0], out[1], out[2], out[3], out[4], out[5], out[6]


def garch_nll_theta(const double[::1] x, const double[::1] theta, double s2init, double scale,
                    int dist):
    """Negative log-likelihood at optimiser coordinates (``inf`` if infeasible)."""
    cdef double out[7]
    cdef double v
    with nogil:
        _unpack(theta, dist, scale, out)
        v = _nll(x, out[0], out[1], out[2], out[3], out[4], s2init, dist,
                 out[5] if dist >= 1 else 0.0, out[6])
    return v

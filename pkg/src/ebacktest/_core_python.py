"""
Pure-Python (NumPy/SciPy) implementation of the numerical core.

Mirrors the compiled ``_core`` extension function for function.  It is
selected automatically when the extension is not built, and is kept as the
readable reference for the Cython code.
"""

import math

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

from ebacktest import _formulas as fm

IMPLEMENTATION = "python"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ZERO_TOL = 1e-12

DIST_NORMAL = 0
DIST_STUDENT_T = 1
DIST_SKEWED_T = 2


def payoffs(code, p, m, x, r, z, rs, zs, sign):
    return np.asarray(fm.payoff(code, x, r, z, rs, zs, p, m, sign), dtype=float)


def history_moments(code, p, m, x, lo, hi, r, z, rs, zs, sign):
    """First and second moments of the payoff over ``x[lo[t]:hi[t]]``.

    The payoff for every history point is evaluated at the forecasts of
    day ``t`` (``r[t]``, ``z[t]``, ``rs[t]``, ``zs[t]``).
    """
    n = len(lo)
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    for t in range(n):
        a, b = lo[t], hi[t]
        if b <= a:
            continue
        g = fm.payoff(code, x[a:b], r[t], z[t], rs[t], zs[t], p, m, sign)
        s1[t] = g.sum()
        s2[t] = (g * g).sum()
    return s1, s2


def _log_growth(g, lam):
    f = 1.0 + lam * g
    if np.any(f < 0.0):
        f = np.where(f < 0.0, 0.0, f)
    with np.errstate(divide="ignore"):
        return np.log(f).sum()


def grel_argmax(g, cap, tol):
    """Maximise ``sum(log(1 + lam * g))`` over ``lam`` in ``[0, cap]``."""
    if len(g) == 0 or cap <= 0.0:
        return 0.0
    if g.sum() <= 0.0:
        return 0.0
    f_cap = 1.0 + cap * g
    if np.all(f_cap > 0.0) and (g / f_cap).sum() >= 0.0:
        return cap
    a, b = 0.0, cap
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _log_growth(g, c)
    fd = _log_growth(g, d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _log_growth(g, c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _log_growth(g, d)
    lam = 0.5 * (a + b)
    if _log_growth(g, lam) < 0.0:
        return 0.0
    return lam


def history_grel(code, p, m, x, lo, hi, r, z, rs, zs, sign, cap, tol):
    n = len(lo)
    lam = np.zeros(n)
    for t in range(n):
        a, b = lo[t], hi[t]
        if b <= a:
            continue
        g = fm.payoff(code, x[a:b], r[t], z[t], rs[t], zs[t], p, m, sign)
        lam[t] = grel_argmax(np.asarray(g, dtype=float), cap[t], tol)
    return lam


def _factor(lam, g, t):
    f = 1.0 + lam * g
    if f < 0.0:
        if f > -ZERO_TOL:
            return 0.0
        raise ArithmeticError(t)
    return f


def _step_log(log_w, lam, g, t):
    f = _factor(lam, g, t)
    if f == 0.0:
        return -math.inf
    return log_w + math.log1p(lam * g)


def wealth_path(lam, g, reset_before, threshold):
    """Log-wealth path with optional restarts.

    ``reset_before[t]`` restarts the process at 1 before step ``t``.  When
    ``threshold`` is finite the process also restarts at ``t + 1`` whenever
    ``M_t >= threshold``.  Returns ``(log_wealth, segment_id)``; raises
    ``ArithmeticError(t)`` if a factor is negative.
    """
    n = len(g)
    out = np.empty(n)
    seg = np.empty(n, dtype=np.int64)
    log_w = 0.0
    s = 0
    pending = False
    for t in range(n):
        if t > 0 and (reset_before[t] or pending):
            log_w = 0.0
            s += 1
        pending = False
        log_w = _step_log(log_w, lam[t], g[t], t)
        out[t] = log_w
        seg[t] = s
        if threshold < math.inf and math.exp(log_w) >= threshold:
            pending = True
    return out, seg


def _crossed(w1, w2, threshold, mix):
    if mix:
        return 0.5 * (math.exp(w1) + math.exp(w2)) >= threshold
    return math.exp(w1) >= threshold or math.exp(w2) >= threshold


def wealth_pair_path(lam1, g1, lam2, g2, reset_before, threshold, mix=0):
    """Two processes evolved in lockstep with joint restarts.

    With ``mix=0`` a restart is triggered when either process reaches
    ``threshold``; with ``mix=1`` when their equal-weight average does.
    """
    n = len(g1)
    out1 = np.empty(n)
    out2 = np.empty(n)
    seg = np.empty(n, dtype=np.int64)
    w1 = w2 = 0.0
    s = 0
    pending = False
    for t in range(n):
        if t > 0 and (reset_before[t] or pending):
            w1 = w2 = 0.0
            s += 1
        pending = False
        w1 = _step_log(w1, lam1[t], g1[t], t)
        w2 = _step_log(w2, lam2[t], g2[t], t)
        out1[t] = w1
        out2[t] = w2
        seg[t] = s
        if threshold < math.inf and _crossed(w1, w2, threshold, mix):
            pending = True
    return out1, out2, seg


def garch_filter(x, phi0, phi1, a0, a1, b1, s2init):
    """AR(1)-GARCH(1,1) residuals and conditional variances given ``x[0]``."""
    x = np.asarray(x, dtype=float)
    eps = x[1:] - phi0 - phi1 * x[:-1]
    n = len(eps)
    sigma2 = np.empty(n)
    if n == 0:
        return eps, sigma2
    sigma2[0] = s2init
    if n > 1:
        u = a0 + a1 * eps[:-1] ** 2
        sigma2[1:], _ = lfilter([1.0], [1.0, -b1], u, zi=[b1 * s2init])
    return eps, sigma2


def std_logpdf(zs, dist, nu, gam):
    if dist == DIST_NORMAL:
        return -0.5 * math.log(2.0 * math.pi) - 0.5 * zs * zs
    c_t = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    if dist == DIST_STUDENT_T:
        s = math.sqrt((nu - 2.0) / nu)
        u = zs / s
        return c_t - math.log(s) - 0.5 * (nu + 1.0) * np.log1p(u * u / nu)
    m1 = 2.0 * math.exp(c_t) * nu / (nu - 1.0)
    mean = m1 * (gam - 1.0 / gam)
    ex2 = (gam ** 3 + gam ** -3) / (gam + 1.0 / gam) * nu / (nu - 2.0)
    sd = math.sqrt(ex2 - mean * mean)
    xs = mean + sd * zs
    u = np.where(xs >= 0.0, xs / gam, xs * gam)
    return (math.log(2.0 / (gam + 1.0 / gam)) + math.log(sd) + c_t
            - 0.5 * (nu + 1.0) * np.log1p(u * u / nu))


def garch_nll(x, phi0, phi1, a0, a1, b1, s2init, dist, nu, gam):
    eps, sigma2 = garch_filter(x, phi0, phi1, a0, a1, b1, s2init)
    if np.any(sigma2 <= 0.0):
        return math.inf
    sd = np.sqrt(sigma2)
    ll = std_logpdf(eps / sd, dist, nu, gam) - np.log(sd)
    return -float(ll.sum())


# unconstrained optimiser coordinates -> AR-GARCH parameters
PERSIST_MAX = 0.9999
PHI_MAX = 0.999
NU_MIN = 2.05
NU_MAX = 200.0


def _expit(v):
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def unpack_theta(theta, dist, scale):
    """``(phi0, phi1, alpha0, alpha1, beta1, nu, gamma)`` from optimiser coordinates."""
    th = [float(v) for v in theta]
    pers = PERSIST_MAX * _expit(th[3])
    share = _expit(th[4])
    nu, gam = math.inf, 1.0
    if dist >= 1:
        nu = NU_MIN + min(math.exp(th[5]), NU_MAX)
    if dist == 2:
        gam = math.exp(min(max(th[6], -5.0), 5.0))
    return (th[0] * scale, PHI_MAX * math.tanh(th[1]), math.exp(th[2]) * scale * scale,
            pers * share, pers * (1.0 - share), nu, gam)


def garch_nll_theta(x, theta, s2init, scale, dist):
    """Negative log-likelihood at optimiser coordinates (``inf`` if infeasible)."""
    phi0, phi1, a0, a1, b1, nu, gam = unpack_theta(theta, dist, scale)
    return garch_nll(x, phi0, phi1, a0, a1, b1, s2init, dist, nu if dist >= 1 else 0.0, gam)

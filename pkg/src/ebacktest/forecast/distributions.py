"""
Standardised innovation distributions and their risk functionals.

Every parametric family here has mean 0 and variance 1.  Besides the usual
pdf/cdf/ppf, each exposes the upper partial moment ``E[(Z - a)_+]``, from
which ES and the expectile follow:

* ``ES_p = VaR_p + E[(Z - VaR_p)_+] / (1 - p)``
* the expectile ``a`` solves ``(2p - 1) E[(Z - a)_+] = (1 - p)(a - E Z)``.

The skewed t is the Fernandez-Steel construction: a Student t with scale
``gamma`` on the right half-line and ``1/gamma`` on the left, shifted and
scaled to zero mean and unit variance.  Its partial moments are closed form.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special, stats

from ebacktest.exceptions import DomainError

__all__ = [
    "Innovation",
    "Normal",
    "StudentT",
    "SkewedT",
    "Empirical",
    "SplicedGPD",
    "risk_values",
]


def _t_partial(c, nu):
    """``E[(T - c)_+]`` for a unit-scale Student t with ``nu > 1``."""
    c = np.asarray(c, dtype=float)
    return stats.t.pdf(c, nu) * (nu + c * c) / (nu - 1.0) - c * stats.t.sf(c, nu)


def _t_partial2(c, nu):
    """``E[(T - c)_+^2]`` for a unit-scale Student t with ``nu > 2``."""
    c = np.asarray(c, dtype=float)
    # E[T 1{T>c}] and E[T^2 1{T>c}], the latter by parts
    dens = stats.t.pdf(c, nu) * (nu + c * c)
    m1 = dens / (nu - 1.0)
    m2 = (c * dens + nu * stats.t.sf(c, nu)) / (nu - 2.0)
    return m2 - 2.0 * c * m1 + c * c * stats.t.sf(c, nu)


class Innovation:
    """Common interface; subclasses implement the primitives."""

    name = "innovation"

    def mean(self):
        return 0.0

    def var(self, p):
        return float(self.ppf(p))

    def partial_moment(self, a):
        raise NotImplementedError

    def es(self, p):
        v = self.var(p)
        return float(v + self.partial_moment(v) / (1.0 - p))

    def expectile(self, p):
        """Root of ``p E(Z-a)_+ = (1-p) E(a-Z)_+`` by Brent's method."""
        mu = self.mean()
        if p == 0.5:
            return float(mu)

        def eq(a):
            up = self.partial_moment(a)
            return p * up - (1.0 - p) * (a - mu + up)

        lo, hi = mu - 1.0, mu + 1.0
        while eq(lo) < 0.0:
            lo = mu - 2.0 * (mu - lo)
        while eq(hi) > 0.0:
            hi = mu + 2.0 * (hi - mu)
        return float(optimize.brentq(eq, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500))

    def variantile(self, p):
        e = self.expectile(p)
        return float(self.asym_square(e, p))

    def asym_square(self, a, p):
        """``E[p (Z-a)_+^2 + (1-p)(Z-a)_-^2]``."""
        up2 = self.partial_moment2(a)
        mu = self.mean()
        total = self.second_moment() - 2.0 * a * mu + a * a
        return p * up2 + (1.0 - p) * (total - up2)

    def second_moment(self):
        return 1.0

    def partial_moment2(self, a):
        raise NotImplementedError


class Normal(Innovation):
    name = "normal"
    code = 0

    def pdf(self, x):
        return stats.norm.pdf(x)

    def logpdf(self, x):
        return stats.norm.logpdf(x)

    def cdf(self, x):
        return stats.norm.cdf(x)

    def ppf(self, q):
        return stats.norm.ppf(q)

    def partial_moment(self, a):
        a = np.asarray(a, dtype=float)
        return stats.norm.pdf(a) - a * stats.norm.sf(a)

    def partial_moment2(self, a):
        a = np.asarray(a, dtype=float)
        return (1.0 + a * a) * stats.norm.sf(a) - a * stats.norm.pdf(a)

    def sample(self, rng, size):
        return rng.standard_normal(size)

    def params(self):
        return {}


class StudentT(Innovation):
    """Student t with ``nu > 2`` degrees of freedom scaled to unit variance."""

    name = "student_t"
    code = 1

    def __init__(self, nu):
        if not nu > 2.0:
            raise DomainError(f"unit-variance t needs nu > 2, got {nu}")
        self.nu = float(nu)
        self.scale = math.sqrt((self.nu - 2.0) / self.nu)

    def pdf(self, x):
        return stats.t.pdf(np.asarray(x) / self.scale, self.nu) / self.scale

    def logpdf(self, x):
        return stats.t.logpdf(np.asarray(x) / self.scale, self.nu) - math.log(self.scale)

    def cdf(self, x):
        return stats.t.cdf(np.asarray(x) / self.scale, self.nu)

    def ppf(self, q):
        return self.scale * stats.t.ppf(q, self.nu)

    def partial_moment(self, a):
        return self.scale * _t_partial(np.asarray(a) / self.scale, self.nu)

    def partial_moment2(self, a):
        return self.scale ** 2 * _t_partial2(np.asarray(a) / self.scale, self.nu)

    def sample(self, rng, size):
        return self.scale * rng.standard_t(self.nu, size)

    def params(self):
        return {"nu": self.nu}


class SkewedT(Innovation):
    """Fernandez-Steel skewed t, standardised to mean 0 and variance 1.

    Parameters
    ----------
    nu : float
        Shape (degrees of freedom), ``nu > 2``.
    gamma : float
        Skewness, ``gamma > 0``; ``gamma > 1`` puts more mass on the right.
    """

    name = "skewed_t"
    code = 2

    def __init__(self, nu, gamma):
        if not nu > 2.0:
            raise DomainError(f"unit-variance skewed t needs nu > 2, got {nu}")
        if not gamma > 0.0:
            raise DomainError(f"skewness gamma must be positive, got {gamma}")
        self.nu = float(nu)
        self.gamma = float(gamma)
        g = self.gamma
        m1 = 2.0 * stats.t.pdf(0.0, self.nu) * self.nu / (self.nu - 1.0)
        self.m = m1 * (g - 1.0 / g)
        ex2 = (g ** 3 + g ** -3) / (g + 1.0 / g) * self.nu / (self.nu - 2.0)
        self.s = math.sqrt(ex2 - self.m ** 2)
        self.split = 1.0 / (1.0 + g * g)

    # raw (unstandardised) Fernandez-Steel variable X
    def _raw_pdf(self, x):
        g = self.gamma
        x = np.asarray(x, dtype=float)
        u = np.where(x >= 0.0, x / g, x * g)
        return 2.0 / (g + 1.0 / g) * stats.t.pdf(u, self.nu)

    def _raw_cdf(self, x):
        g, nu = self.gamma, self.nu
        x = np.asarray(x, dtype=float)
        left = 2.0 / (g * g + 1.0) * stats.t.cdf(x * g, nu)
        right = 1.0 - 2.0 * g * g / (g * g + 1.0) * stats.t.sf(x / g, nu)
        return np.where(x < 0.0, left, right)

    def _raw_ppf(self, q):
        g, nu = self.gamma, self.nu
        q = np.asarray(q, dtype=float)
        lo = stats.t.ppf(np.minimum(q, self.split) * (1.0 + g * g) / 2.0, nu) / g
        tail = np.maximum(1.0 - q, 0.0) * (1.0 + g * g) / (2.0 * g * g)
        hi = g * stats.t.isf(np.minimum(tail, 0.5), nu)
        return np.where(q < self.split, lo, hi)

    def _raw_partial(self, c):
        """``E[(X - c)_+]`` for the raw variable."""
        g, nu = self.gamma, self.nu
        c = np.asarray(c, dtype=float)
        k = 2.0 / (g + 1.0 / g)
        pos = k * g * g * _t_partial(np.maximum(c, 0.0) / g, nu)
        # (x - c)_+ = x - c + (c - x)_+ for c < 0
        neg_tail = k / (g * g) * _t_partial(-np.minimum(c, 0.0) * g, nu)
        neg = self.m - c + neg_tail
        return np.where(c >= 0.0, pos, neg)

    def _raw_partial2(self, c):
        """``E[(X - c)_+^2]`` for the raw variable."""
        g, nu = self.gamma, self.nu
        c = np.asarray(c, dtype=float)
        k = 2.0 / (g + 1.0 / g)
        pos = k * g ** 3 * _t_partial2(np.maximum(c, 0.0) / g, nu)
        ex2 = (g ** 3 + g ** -3) / (g + 1.0 / g) * nu / (nu - 2.0)
        # (x - c)_+^2 = (x - c)^2 - (c - x)_+^2
        lower2 = k / g ** 3 * _t_partial2(-np.minimum(c, 0.0) * g, nu)
        neg = ex2 - 2.0 * c * self.m + c * c - lower2
        return np.where(c >= 0.0, pos, neg)

    def pdf(self, z):
        return self.s * self._raw_pdf(self.m + self.s * np.asarray(z, dtype=float))

    def logpdf(self, z):
        g = self.gamma
        x = self.m + self.s * np.asarray(z, dtype=float)
        u = np.where(x >= 0.0, x / g, x * g)
        return math.log(2.0 / (g + 1.0 / g)) + math.log(self.s) + stats.t.logpdf(u, self.nu)

    def cdf(self, z):
        return self._raw_cdf(self.m + self.s * np.asarray(z, dtype=float))

    def ppf(self, q):
        return (self._raw_ppf(q) - self.m) / self.s

    def partial_moment(self, a):
        return self._raw_partial(self.m + self.s * np.asarray(a, dtype=float)) / self.s

    def partial_moment2(self, a):
        return self._raw_partial2(self.m + self.s * np.asarray(a, dtype=float)) / self.s ** 2

    def sample(self, rng, size):
        g = self.gamma
        t = np.abs(rng.standard_t(self.nu, size))
        right = rng.random(size) < g * g / (1.0 + g * g)
        x = np.where(right, g * t, -t / g)
        return (x - self.m) / self.s

    def params(self):
        return {"nu": self.nu, "gamma": self.gamma}


class Empirical(Innovation):
    """Empirical distribution of a sample (used for bootstrap draws)."""

    name = "empirical"

    def __init__(self, sample):
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        if x.size == 0:
            raise DomainError("empirical distribution of an empty sample")
        self.x = x
        self._cum = np.concatenate([[0.0], np.cumsum(x[::-1])])  # sums of the k largest

    def mean(self):
        return float(self.x.mean())

    def second_moment(self):
        return float(np.mean(self.x * self.x))

    def var(self, p):
        """Lower quantile ``x_(ceil(n p))``."""
        n = self.x.size
        k = max(int(math.ceil(n * p - 1e-12)), 1)
        return float(self.x[k - 1])

    def partial_moment(self, a):
        a = np.asarray(a, dtype=float)
        n = self.x.size
        k = n - np.searchsorted(self.x, a, side="right")  # count strictly above a
        return (self._cum[k] - k * a) / n

    def partial_moment2(self, a):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        out = np.array([np.mean(np.maximum(self.x - v, 0.0) ** 2) for v in a])
        return out if out.size > 1 else float(out[0])

    def expectile(self, p):
        mu = self.mean()
        if p == 0.5:
            return mu

        def eq(a):
            up = float(self.partial_moment(a))
            return p * up - (1.0 - p) * (a - mu + up)

        lo, hi = float(self.x[0]), float(self.x[-1])
        if lo == hi:
            return lo
        return float(optimize.brentq(eq, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=500))


class SplicedGPD(Innovation):
    """Empirical body below ``u`` with a generalised Pareto tail above it.

    ``P(Z > u + y) = zeta (1 + xi y / beta)^(-1/xi)`` with ``zeta`` the
    exceedance fraction.
    """

    name = "spliced_gpd"

    def __init__(self, sample, u, xi, beta):
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        self.n = x.size
        self.u, self.xi, self.beta = float(u), float(xi), float(beta)
        if not self.beta > 0.0:
            raise DomainError("GPD scale must be positive")
        self.body = x[x <= u]
        self.zeta = 1.0 - self.body.size / self.n
        self._emp = Empirical(x)

    def _tail_sf(self, y):
        xi, beta = self.xi, self.beta
        if abs(xi) < 1e-12:
            return np.exp(-y / beta)
        return np.maximum(1.0 + xi * y / beta, 0.0) ** (-1.0 / xi)

    def _tail_partial(self, d):
        """``E[(Y - d)_+]`` for the GPD excess ``Y`` and ``d >= 0``."""
        xi, beta = self.xi, self.beta
        if xi >= 1.0:
            return math.inf
        return (beta + xi * d) / (1.0 - xi) * self._tail_sf(d)

    def mean(self):
        if self.xi >= 1.0:
            return math.inf
        return float(self.body.sum() / self.n + self.zeta * (self.u + self.beta / (1.0 - self.xi)))

    def var(self, p):
        if 1.0 - p >= self.zeta:
            return self._emp.var(p)
        xi, beta = self.xi, self.beta
        ratio = (1.0 - p) / self.zeta
        if abs(xi) < 1e-12:
            return self.u - beta * math.log(ratio)
        return self.u + beta / xi * (ratio ** (-xi) - 1.0)

    def partial_moment(self, a):
        a = float(a)
        if a >= self.u:
            return self.zeta * self._tail_partial(a - self.u)
        body = np.maximum(self.body - a, 0.0).sum() / self.n
        return body + self.zeta * (self.u - a + self._tail_partial(0.0))

    def _tail_moment2(self, c):
        """``E[(c + Y)^2]`` for the GPD excess ``Y`` (needs ``xi < 1/2``)."""
        xi, beta = self.xi, self.beta
        if xi >= 0.5:
            return math.inf
        ey = beta / (1.0 - xi)
        ey2 = 2.0 * beta * beta / ((1.0 - xi) * (1.0 - 2.0 * xi))
        return c * c + 2.0 * c * ey + ey2

    def second_moment(self):
        return float(np.sum(self.body ** 2) / self.n + self.zeta * self._tail_moment2(self.u))

    def partial_moment2(self, a):
        a = float(a)
        if a >= self.u:
            d = a - self.u
            # excess over d of a GPD is GPD(xi, beta + xi d)
            b = self.beta + self.xi * d
            if self.xi >= 0.5:
                return math.inf
            return self.zeta * self._tail_sf(d) * 2.0 * b * b / ((1.0 - self.xi) * (1.0 - 2.0 * self.xi))
        body = np.sum(np.maximum(self.body - a, 0.0) ** 2) / self.n
        return body + self.zeta * self._tail_moment2(self.u - a)

    def expectile(self, p):
        if self.xi >= 1.0:
            raise DomainError("expectile undefined for a GPD tail with xi >= 1")
        return Innovation.expectile(self, p)


def risk_values(dist: Innovation, kind, p):
    """Standardised ``(r, z)`` for a functional kind (see :mod:`ebacktest.kernels`)."""
    from ebacktest.kernels import Kind

    if kind is Kind.VAR:
        return dist.var(p), None
    if kind is Kind.ES_VAR:
        v = dist.var(p)
        return float(v + dist.partial_moment(v) / (1.0 - p)), v
    if kind is Kind.EXPECTILE:
        return dist.expectile(p), None
    if kind is Kind.EXPECTILE_VARIANTILE:
        e = dist.expectile(p)
        return float(dist.asym_square(e, p)), e
    if kind is Kind.MEAN:
        return dist.mean(), None
    if kind is Kind.MEAN_VARIANCE:
        mu = dist.mean()
        return dist.second_moment() - mu * mu, mu
    raise DomainError(f"unsupported functional {kind}")


def t_logpdf_const(nu):
    return special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)

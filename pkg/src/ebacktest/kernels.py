"""
Identification and scoring kernels for the supported risk functionals.

All evaluators are vectorised over NumPy arrays and raise
:class:`~ebacktest.exceptions.DomainError` (carrying the offending row) when
an input leaves the kernel's domain.  Nothing is clamped: a silently clipped
forecast would break the e-variable property downstream.

Forecast conventions
--------------------
``r`` is always the regulatory coordinate and ``z`` the statistic:

============================  ==============  ==============
kind                          r               z
============================  ==============  ==============
Mean                          mean            unused
MeanVariance                  variance        mean
VaR                           VaR_p           unused
EsVar                         ES_p            VaR_p
Expectile                     ex_p            unused
ExpectileVariantile           var_p           ex_p
============================  ==============  ==============
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ebacktest import _formulas as fm
from ebacktest.exceptions import DomainError

__all__ = [
    "Kind",
    "Variant",
    "Direction",
    "Homogeneity",
    "RiskFunctional",
    "IdentificationKernel",
    "ScoringKernel",
    "eval_identification",
    "eval_score",
    "score_gap_infimum",
    "h_bound",
    "bayes_estat",
    "bayes_loss",
]


class Kind(enum.Enum):
    MEAN = "Mean"
    MEAN_VARIANCE = "MeanVariance"
    VAR = "VaR"
    ES_VAR = "EsVar"
    EXPECTILE = "Expectile"
    EXPECTILE_VARIANTILE = "ExpectileVariantile"

    @classmethod
    def parse(cls, name: str) -> "Kind":
        if isinstance(name, cls):
            return name
        key = name.strip().lower().replace("-", "").replace("_", "").replace(",", "")
        aliases = {
            "mean": cls.MEAN,
            "meanvariance": cls.MEAN_VARIANCE,
            "meanvar": cls.MEAN_VARIANCE,
            "varmean": cls.MEAN_VARIANCE,
            "var": cls.VAR,
            "esvar": cls.ES_VAR,
            "es": cls.ES_VAR,
            "expectile": cls.EXPECTILE,
            "ex": cls.EXPECTILE,
            "expectilevariantile": cls.EXPECTILE_VARIANTILE,
            "variantile": cls.EXPECTILE_VARIANTILE,
            "expvar": cls.EXPECTILE_VARIANTILE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown functional {name!r}") from None


class Variant(enum.Enum):
    RATIO = "RatioForm"
    BOUNDED = "BoundedForm"


class Direction(enum.Enum):
    DECREASING = "DecreasingInR"
    INCREASING = "IncreasingInR"


class Homogeneity(enum.Enum):
    H0 = "H0"
    HHALF = "HHalf"
    H1 = "H1"
    H2 = "H2"
    NONE = "None"

    @property
    def degree(self):
        return {"H0": 0.0, "HHalf": 0.5, "H1": 1.0, "H2": 2.0}.get(self.value)


_TWO_DIM = {Kind.MEAN_VARIANCE, Kind.ES_VAR, Kind.EXPECTILE_VARIANTILE}
_NEEDS_P = {Kind.VAR, Kind.ES_VAR, Kind.EXPECTILE, Kind.EXPECTILE_VARIANTILE}


@dataclass(frozen=True)
class RiskFunctional:
    """Risk measure under test.

    Parameters
    ----------
    kind : Kind
    p : float, optional
        Level in (0, 1); ignored for the mean and mean-variance.
    M : float, optional
        Loss support bound, losses live in ``[-M, M]``.
    """

    kind: Kind
    p: float | None = None
    M: float | None = None

    def __post_init__(self):
        if not isinstance(self.kind, Kind):
            object.__setattr__(self, "kind", Kind.parse(str(self.kind)))
        if self.kind in _NEEDS_P:
            if self.p is None or not 0.0 < self.p < 1.0:
                raise DomainError(f"level p must lie in (0, 1), got {self.p}")
            if self.kind in (Kind.EXPECTILE, Kind.EXPECTILE_VARIANTILE) and self.p < 0.5:
                raise DomainError(f"expectile level must be >= 1/2, got {self.p}")
        if self.M is not None and not self.M > 0.0:
            raise DomainError(f"support bound M must be positive, got {self.M}")

    @property
    def dimension(self) -> int:
        return 2 if self.kind in _TWO_DIM else 1

    @property
    def level(self) -> float:
        return 0.5 if self.p is None else float(self.p)

    def with_bound(self, M) -> "RiskFunctional":
        return RiskFunctional(self.kind, self.p, None if M is None else float(M))

    def label(self) -> str:
        if self.kind in _NEEDS_P:
            return f"{self.kind.value}@{self.p:g}"
        return self.kind.value


def _arr(v):
    return np.atleast_1d(np.asarray(v, dtype=float))


def _bcast(*vals):
    return np.broadcast_arrays(*[_arr(v) for v in vals])


def _first_bad(mask, message):
    """Raise DomainError for the first True entry of ``mask`` (1-based row)."""
    if np.any(mask):
        row = int(np.flatnonzero(np.ravel(mask))[0]) + 1
        raise DomainError(message, row=row)


def _check_finite(**arrays):
    for name, a in arrays.items():
        _first_bad(~np.isfinite(a), f"non-finite {name}")


def _check_support(x, M):
    if M is not None:
        _first_bad(np.abs(x) > M, f"loss outside [-{M:g}, {M:g}]")


def _require_z(functional, z):
    if functional.dimension == 2 and z is None:
        raise DomainError(f"{functional.kind.value} needs the statistic forecast z")


# ---------------------------------------------------------------------------
# identification kernels


@dataclass(frozen=True)
class IdentificationKernel:
    """Identification function V(x, r[, z]) for a standard backtest.

    ``prime=True`` selects the partner V' used by the two-sided mixture
    ``1/2 prod(1 + lam V) + 1/2 prod(1 - lam V')``; it exists for the
    one-dimensional kinds with ``V' <= 1`` (VaR, bounded mean, bounded
    expectile).
    """

    functional: RiskFunctional
    variant: Variant = Variant.RATIO
    prime: bool = False

    def __post_init__(self):
        k = self.functional.kind
        if self.variant is Variant.BOUNDED:
            if k not in (Kind.MEAN, Kind.EXPECTILE):
                raise DomainError(f"no bounded form for {k.value}")
            if self.functional.M is None:
                raise DomainError("bounded-form kernels need a support bound M")
        if self.prime:
            ok = k is Kind.VAR or (self.variant is Variant.BOUNDED and k in (Kind.MEAN, Kind.EXPECTILE))
            if not ok:
                raise DomainError(f"no two-sided partner for {k.value} {self.variant.value}")

    @property
    def code(self) -> int:
        k, b = self.functional.kind, self.variant is Variant.BOUNDED
        if k is Kind.MEAN:
            if not b:
                return fm.MEAN_RATIO
            return fm.MEAN_BOUNDED_PRIME if self.prime else fm.MEAN_BOUNDED
        if k is Kind.VAR:
            return fm.VAR_PRIME if self.prime else fm.VAR
        if k is Kind.ES_VAR:
            return fm.ESVAR
        if k is Kind.EXPECTILE:
            if not b:
                return fm.EXPECTILE_RATIO
            return fm.EXPECTILE_BOUNDED_PRIME if self.prime else fm.EXPECTILE_BOUNDED
        if k is Kind.MEAN_VARIANCE:
            return fm.MEANVAR
        return fm.EXPVARIANTILE

    @property
    def direction(self) -> Direction:
        # every kernel shipped here is non-increasing in the regulatory coordinate
        return Direction.DECREASING

    @property
    def two_sided_capable(self) -> bool:
        try:
            self.partner()
        except DomainError:
            return False
        return True

    def partner(self) -> "IdentificationKernel":
        return IdentificationKernel(self.functional, self.variant, not self.prime)

    def h_max(self, r):
        """Largest admissible weight folded into the bounded forms."""
        r = _arr(r)
        M, p = self.functional.M, self.functional.p
        if self.variant is not Variant.BOUNDED:
            return np.ones_like(r)
        if self.functional.kind is Kind.MEAN:
            return 1.0 / (M - r) if self.prime else 1.0 / (M + r)
        return 1.0 / (p * (M - r)) if self.prime else 1.0 / ((1.0 - p) * (M + r))

    def infimum(self, r, z=None):
        """Infimum over the loss domain of the betting payoff.

        For the primary kernel this is ``inf_x V``; for the partner it is
        ``inf_x (-V')`` since the partner enters as ``1 - lam V'``.
        """
        r = _arr(r)
        if self.code == fm.EXPECTILE_RATIO:
            return np.full_like(r, -(1.0 - self.functional.p))
        return np.full_like(r, -1.0)

    def validate(self, x, r, z=None):
        x, r = _bcast(x, r)
        _check_finite(loss=x, forecast=r)
        f = self.functional
        if z is not None:
            z = np.broadcast_to(_arr(z), r.shape)
            _check_finite(statistic=z)
        _require_z(f, z)
        if self.variant is Variant.BOUNDED:
            _check_support(x, f.M)
            _first_bad(np.abs(r) >= f.M, "bounded form needs |r| < M")
        else:
            _check_support(x, f.M)
        if f.kind in (Kind.MEAN, Kind.EXPECTILE) and self.variant is Variant.RATIO:
            _first_bad(r <= 0.0, "ratio form needs r > 0")
            _first_bad(x < 0.0, "ratio form needs nonnegative losses")
        if f.kind is Kind.ES_VAR:
            _first_bad(r <= z, "ES forecast must exceed the VaR forecast (r > z)")
        if f.kind in (Kind.MEAN_VARIANCE, Kind.EXPECTILE_VARIANTILE):
            _first_bad(r <= 0.0, "variance-type forecast must be positive")
        return x, r, z


def eval_identification(kernel: IdentificationKernel, x, r, z=None, h=None):
    """Evaluate V(x, r[, z]).

    For bounded forms ``h`` is the weight multiplying ``x - r`` (default: the
    largest admissible one, which makes ``inf V = -1``); it must not exceed
    :meth:`IdentificationKernel.h_max`.  Returns an array.
    """
    x, r, z = kernel.validate(x, r, z)
    zz = r if z is None else z
    f = kernel.functional
    m = 0.0 if f.M is None else f.M
    v = fm.identification(kernel.code, x, r, zz, f.level, m)
    if h is not None:
        if kernel.variant is not Variant.BOUNDED:
            raise DomainError("explicit h only applies to bounded forms")
        hmax = kernel.h_max(r)
        h = np.broadcast_to(_arr(h), r.shape)
        _first_bad((h < 0.0) | (h > hmax * (1.0 + 1e-12)), "h outside [0, h_max(r)]")
        v = v * (h / hmax)
    return v


# ---------------------------------------------------------------------------
# scoring kernels

_SCORE_TABLE = {
    (Kind.MEAN, Homogeneity.H2): fm.S_MEAN_H2,
    (Kind.MEAN_VARIANCE, Homogeneity.NONE): fm.S_MEANVAR,
    (Kind.VAR, Homogeneity.H1): fm.S_VAR_H1,
    (Kind.VAR, Homogeneity.H0): fm.S_VAR_H0,
    (Kind.ES_VAR, Homogeneity.HHALF): fm.S_ESVAR_HHALF,
    (Kind.ES_VAR, Homogeneity.H0): fm.S_ESVAR_H0,
    (Kind.EXPECTILE, Homogeneity.H2): fm.S_EXPECTILE_H2,
    (Kind.EXPECTILE, Homogeneity.H0): fm.S_EXPECTILE_H0,
}

_DEFAULT_HOMOGENEITY = {
    Kind.MEAN: Homogeneity.H2,
    Kind.MEAN_VARIANCE: Homogeneity.NONE,
    Kind.VAR: Homogeneity.H1,
    Kind.ES_VAR: Homogeneity.HHALF,
    Kind.EXPECTILE: Homogeneity.H2,
}


@dataclass(frozen=True)
class ScoringKernel:
    """Strictly consistent scoring function for a comparative backtest."""

    functional: RiskFunctional
    homogeneity: Homogeneity | None = None

    def __post_init__(self):
        k = self.functional.kind
        if k is Kind.EXPECTILE_VARIANTILE:
            raise DomainError("no scoring kernel is provided for the expectile-variantile pair")
        hom = self.homogeneity or _DEFAULT_HOMOGENEITY[k]
        object.__setattr__(self, "homogeneity", hom)
        if (k, hom) not in _SCORE_TABLE:
            raise DomainError(f"no {hom.value} scoring kernel for {k.value}")
        if self.functional.M is None:
            raise DomainError("scoring kernels need a support bound M")

    @property
    def code(self) -> int:
        return _SCORE_TABLE[(self.functional.kind, self.homogeneity)]

    @property
    def M(self) -> float:
        return self.functional.M

    def validate_forecasts(self, r, z=None, what="forecast"):
        r = _arr(r)
        f = self.functional
        _require_z(f, z)
        _check_finite(**{what: r})
        if z is not None:
            z = np.broadcast_to(_arr(z), r.shape)
            _check_finite(**{what + " statistic": z})
        code = self.code
        if code in (fm.S_VAR_H0, fm.S_EXPECTILE_H0):
            _first_bad(r <= 0.0, f"0-homogeneous kernel needs positive {what}")
        elif code == fm.S_ESVAR_HHALF:
            _first_bad(z <= 0.0, f"(ES,VaR) kernel needs positive VaR {what}")
            _first_bad(z > r, f"(ES,VaR) kernel needs VaR <= ES ({what})")
        elif code == fm.S_ESVAR_H0:
            _first_bad(r <= 0.0, f"0-homogeneous kernel needs positive ES {what}")
            _first_bad(z > r, f"(ES,VaR) kernel needs VaR <= ES ({what})")
        elif code == fm.S_MEANVAR:
            _first_bad(r < 0.0, f"variance {what} must be nonnegative")
        return r, z


def eval_score(kernel: ScoringKernel, x, r, z=None):
    """Evaluate S(x, r[, z]); returns an array."""
    x = _arr(x)
    _check_finite(loss=x)
    _check_support(x, kernel.M)
    r, z = kernel.validate_forecasts(r, z)
    x, r = np.broadcast_arrays(x, r)
    zz = r if z is None else np.broadcast_to(z, r.shape)
    return fm.score(kernel.code, x, r, zz, kernel.functional.level)


def _gap_infimum(code, p, M, r, z, rs, zs):
    """Closed-form ``inf_{x in [-M, M]} S(x, r, z) - S(x, rs, zs)``."""
    if code == fm.S_MEAN_H2:
        return -2.0 * M * np.abs(r - rs) + r * r - rs * rs
    if code == fm.S_MEANVAR:
        dr, dz = r - rs, z - zs
        const = r * r - rs * rs + z * z - zs * zs
        with np.errstate(divide="ignore", invalid="ignore"):
            vertex = -(zs - z) / (2.0 * (rs - r))
            inner = (rs > r) & (np.abs(vertex) <= M)
            quad = np.where(inner, dz * dz / (2.0 * np.where(inner, dr, -1.0)), 0.0)
        ends = -2.0 * M * (M * dr + np.abs(dz))
        return const + np.where(inner, quad, ends)
    if code == fm.S_VAR_H1:
        low = np.minimum(r, -M) - np.minimum(rs, -M)
        high = np.minimum(r, M) - np.minimum(rs, M)
        return (1.0 - p) * (r - rs) - np.where(r <= rs, low, high)
    if code in (fm.S_ESVAR_HHALF, fm.S_ESVAR_H0):
        if code == fm.S_ESVAR_HHALF:
            a, b = 1.0 / (2.0 * np.sqrt(r)), 1.0 / (2.0 * np.sqrt(rs))
            const = (1.0 - p) * ((r + z) * a - (rs + zs) * b)
        else:
            a, b = 1.0 / r, 1.0 / rs
            const = (1.0 - p) * (z / r - zs / rs + np.log(r / rs))
        zc = np.clip(z, -M, M)
        below = (np.maximum(z, -M) - z) * a
        lower = below - np.maximum(zc - zs, 0.0) * b
        upper = np.minimum((M - np.minimum(z, M)) * a - (M - np.minimum(zs, M)) * b, below)
        return const + np.where(r <= rs, lower, upper)
    if code == fm.S_EXPECTILE_H2:
        first = ((rs <= r) & (r <= M)) | ((r < rs) & (rs < -M))
        second = (r >= rs) & (r > M)
        third = (r < rs) & (rs >= -M)
        g1 = p * (r * r - rs * rs - 2.0 * M * np.abs(r - rs))
        g2 = (1.0 - p) * (r * r - rs * rs - 2.0 * M * (r - rs)) + (1.0 - 2.0 * p) * (np.maximum(M, rs) - rs) ** 2
        g3 = (1.0 - p) * (r * r - rs * rs + 2.0 * M * (r - rs)) - (1.0 - 2.0 * p) * (np.maximum(-M, r) - r) ** 2
        return np.where(first, g1, 0.0) + np.where(second, g2, 0.0) + np.where(third, g3, 0.0)
    if code == fm.S_VAR_H0:
        cap = np.minimum(np.maximum(rs, M), r)
        with np.errstate(divide="ignore", invalid="ignore"):
            jump = np.where(r > rs, np.log(np.where(r > rs, cap, 1.0) / rs), 0.0)
        return (1.0 - p) * np.log(r / rs) - jump
    if code == fm.S_EXPECTILE_H0:
        lr = np.log(r / rs)
        out = np.where(r <= rs, (1.0 - p) * (lr - M / r + M / rs), 0.0)
        mid = (rs < M) & (M < r)
        out = out - np.where(mid, (1.0 - 2.0 * p) * (np.log(M / rs) + 1.0 - M / rs), 0.0)
        w = np.abs(1.0 - p - (r <= M))
        out = out + np.where(r > rs, w * (lr + M / r - M / rs), 0.0)
        return out
    raise ValueError(f"unknown score code {code}")


def score_gap_infimum(kernel: ScoringKernel, r, z=None, r_star=None, z_star=None):
    """Infimum over ``x in [-M, M]`` of ``S(x, r, z) - S(x, r*, z*)``.

    Uses the closed forms of the kernel family (for the 0-homogeneous VaR
    kernel the range is ``[0, M]``, which gives the same value because the
    gap is constant below ``min(r, r*)``).
    """
    if r_star is None:
        raise DomainError("r_star is required")
    r, z = kernel.validate_forecasts(r, z, "internal forecast")
    rs, zs = kernel.validate_forecasts(r_star, z_star, "standard forecast")
    r, rs = np.broadcast_arrays(r, rs)
    if z is not None:
        z, zs = np.broadcast_arrays(np.broadcast_to(z, r.shape), np.broadcast_to(zs, r.shape))
    else:
        z, zs = r, rs
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _gap_infimum(kernel.code, kernel.functional.level, kernel.M, r, z, rs, zs)
    # identical forecasts give a gap that is identically zero
    same = (r == rs) & (z == zs)
    return np.where(same, 0.0, out)


def h_bound(kernel: ScoringKernel, r, z=None, r_star=None, z_star=None):
    """Largest admissible h: ``1 / ((-inf gap) v 0)`` with ``1/0 = inf``."""
    g = score_gap_infimum(kernel, r, z, r_star, z_star)
    neg = np.maximum(-g, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(neg > 0.0, 1.0 / np.where(neg > 0.0, neg, 1.0), np.inf)


# ---------------------------------------------------------------------------
# Bayes pairs


def bayes_loss(functional: RiskFunctional, x, z):
    """Loss S(x, z) whose minimiser is the statistic and minimum the risk measure."""
    x, z = _bcast(x, z)
    k = functional.kind
    if k is Kind.MEAN_VARIANCE:
        return (x - z) ** 2
    if k is Kind.ES_VAR:
        return z + np.maximum(x - z, 0.0) / (1.0 - functional.p)
    if k is Kind.EXPECTILE_VARIANTILE:
        d = x - z
        p = functional.p
        return np.where(d > 0.0, p, 1.0 - p) * d * d
    raise DomainError(f"{k.value} is not a Bayes pair")


def _bayes_loss_infimum(functional, z):
    if functional.kind is Kind.ES_VAR:
        M = functional.M
        if M is None:
            return z
        return z + np.maximum(-M - z, 0.0) / (1.0 - functional.p)
    if functional.M is None:
        return np.zeros_like(z)
    d = np.clip(z, -functional.M, functional.M) - z
    return bayes_loss(functional, d, 0.0)


def bayes_estat(functional: RiskFunctional, x, r, z, h):
    """Model-free e-statistic ``1 + h (S(x, z) - r)`` for a Bayes pair.

    With ``h = 1/(r - z)`` for (ES, VaR) this is ``(x - z)_+ / ((1-p)(r - z))``;
    with ``h = 1/r`` for (Var, E) it is ``(x - z)^2 / r``.
    """
    x, r, z, h = _bcast(x, r, z, h)
    _check_finite(loss=x, forecast=r, statistic=z, weight=h)
    _check_support(x, functional.M)
    _first_bad(h < 0.0, "h must be nonnegative")
    low = h * (_bayes_loss_infimum(functional, z) - r)
    _first_bad(low < -1.0 - 1e-12, "h (S(x, z) - r) falls below -1 on the loss domain")
    return 1.0 + h * (bayes_loss(functional, x, z) - r)


def default_scoring_homogeneity(kind: Kind) -> Homogeneity:
    return _DEFAULT_HOMOGENEITY[kind]


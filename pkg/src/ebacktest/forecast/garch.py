"""
AR(1)-GARCH(1,1) estimation by maximum likelihood.

    L_t = mu_t + sigma_t Z_t,   mu_t = phi0 + phi1 L_{t-1},
    sigma_t^2 = alpha0 + alpha1 eps_{t-1}^2 + beta1 sigma_{t-1}^2,

with ``eps_t = L_t - mu_t`` and ``Z_t`` standardised normal, t or skewed t.
The likelihood conditions on the first observation and starts the variance
recursion at the sample variance of the window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.special import logit

from ebacktest._corelib import core, pycore
from ebacktest.exceptions import FitError
from ebacktest.forecast.distributions import Normal, SkewedT, StudentT

__all__ = ["InnovationKind", "GarchSpec", "fit_garch", "constant_vol_spec"]

# transform constants live with the objective in the numerical core
_PERSIST_MAX = pycore.PERSIST_MAX
_PHI_MAX = pycore.PHI_MAX
_NU_MIN = pycore.NU_MIN
_VAR_FLOOR = 1e-12


class InnovationKind(enum.Enum):
    NORMAL = "normal"
    STUDENT_T = "t"
    SKEWED_T = "st"

    @classmethod
    def parse(cls, name) -> "InnovationKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        for kind, aliases in (
            (cls.NORMAL, ("n", "normal", "gaussian")),
            (cls.STUDENT_T, ("t", "studentt", "student")),
            (cls.SKEWED_T, ("st", "skewedt", "skewt", "skewed")),
        ):
            if key in aliases:
                return kind
        raise ValueError(f"unknown innovation {name!r}")

    @property
    def code(self):
        return {self.NORMAL: core.DIST_NORMAL, self.STUDENT_T: core.DIST_STUDENT_T,
                self.SKEWED_T: core.DIST_SKEWED_T}[self]

    @property
    def n_shape(self):
        return {self.NORMAL: 0, self.STUDENT_T: 1, self.SKEWED_T: 2}[self]


@dataclass(frozen=True)
class GarchSpec:
    """Fitted (or prescribed) AR(1)-GARCH(1,1) model."""

    phi0: float
    phi1: float
    alpha0: float
    alpha1: float
    beta1: float
    innovation: InnovationKind = InnovationKind.NORMAL
    nu: float = math.inf
    gamma: float = 1.0
    loglik: float = field(default=math.nan, compare=False)
    fallback: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "innovation", InnovationKind.parse(self.innovation))
        for name in ("phi0", "phi1", "alpha0", "alpha1", "beta1", "nu", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.alpha0 > 0.0:
            raise ValueError("alpha0 must be positive")
        if self.alpha1 < 0.0 or self.beta1 < 0.0:
            raise ValueError("alpha1 and beta1 must be non-negative")
        if not self.alpha1 + self.beta1 < 1.0:
            raise ValueError("alpha1 + beta1 must be < 1 for stationarity")
        if self.innovation is not InnovationKind.NORMAL and not self.nu > 2.0:
            raise ValueError("nu must exceed 2")

    @property
    def unconditional_variance(self):
        return self.alpha0 / (1.0 - self.alpha1 - self.beta1)

    def distribution(self):
        if self.innovation is InnovationKind.NORMAL:
            return Normal()
        if self.innovation is InnovationKind.STUDENT_T:
            return StudentT(self.nu)
        return SkewedT(self.nu, self.gamma)

    def filter(self, x, s2init=None):
        """Residuals ``eps_t`` and variances ``sigma_t^2`` for ``t = 1..n-1``."""
        x = np.ascontiguousarray(x, dtype=float)
        s2 = float(np.var(x)) if s2init is None else float(s2init)
        return core.garch_filter(x, self.phi0, self.phi1, self.alpha0, self.alpha1, self.beta1, s2)

    def one_step(self, x, s2init=None):
        """``(mu, sigma)`` for the day after the last observation of ``x``."""
        x = np.asarray(x, dtype=float)
        eps, s2 = self.filter(x, s2init)
        mu = self.phi0 + self.phi1 * x[-1]
        if eps.size:
            var = self.alpha0 + self.alpha1 * eps[-1] ** 2 + self.beta1 * s2[-1]
        else:
            var = float(np.var(x)) if s2init is None else float(s2init)
        return float(mu), math.sqrt(max(var, _VAR_FLOOR))

    def residuals(self, x, s2init=None):
        eps, s2 = self.filter(x, s2init)
        return eps / np.sqrt(s2)

    def nll(self, x, s2init=None):
        x = np.ascontiguousarray(x, dtype=float)
        s2 = float(np.var(x)) if s2init is None else float(s2init)
        nu = self.nu if math.isfinite(self.nu) else 0.0
        return float(core.garch_nll(x, self.phi0, self.phi1, self.alpha0, self.alpha1,
                                    self.beta1, s2, self.innovation.code, nu, self.gamma))

    def to_dict(self):
        return {
            "phi0": self.phi0, "phi1": self.phi1, "alpha0": self.alpha0,
            "alpha1": self.alpha1, "beta1": self.beta1,
            "innovation": self.innovation.value,
            "nu": None if not math.isfinite(self.nu) else self.nu,
            "gamma": self.gamma, "loglik": self.loglik, "fallback": self.fallback,
        }


def _unpack(theta, kind, scale):
    """Unconstrained vector -> model parameters (see the numerical core)."""
    return core.unpack_theta(np.asarray(theta, dtype=float), kind.code, scale)


def _pack(spec: GarchSpec, kind, scale):
    pers = min(max(spec.alpha1 + spec.beta1, 1e-4), _PERSIST_MAX * (1 - 1e-6))
    share = spec.alpha1 / (spec.alpha1 + spec.beta1) if spec.alpha1 + spec.beta1 > 0 else 0.5
    share = min(max(share, 1e-4), 1 - 1e-4)
    theta = [
        spec.phi0 / scale,
        math.atanh(min(max(spec.phi1 / _PHI_MAX, -0.999), 0.999)),
        math.log(spec.alpha0 / (scale * scale)),
        float(logit(pers / _PERSIST_MAX)),
        float(logit(share)),
    ]
    if kind.n_shape >= 1:
        nu = spec.nu if math.isfinite(spec.nu) else 8.0
        theta.append(math.log(max(nu - _NU_MIN, 1e-3)))
    if kind.n_shape == 2:
        theta.append(math.log(spec.gamma))
    return np.array(theta)


def constant_vol_spec(x, innovation="normal"):
    """Feasible fallback: iid model with the sample mean and variance."""
    x = np.asarray(x, dtype=float)
    kind = InnovationKind.parse(innovation)
    var = float(np.var(x))
    if not var > _VAR_FLOOR:
        raise FitError("degenerate window: sample variance is zero")
    nu = 8.0 if kind is not InnovationKind.NORMAL else math.inf
    spec = GarchSpec(float(np.mean(x)), 0.0, var, 0.0, 0.0, kind, nu, 1.0, fallback=True)
    return replace(spec, loglik=-spec.nll(x, var))


def _default_start(x, kind):
    var = float(np.var(x))
    nu = 8.0 if kind is not InnovationKind.NORMAL else math.inf
    return GarchSpec(float(np.mean(x)), 0.05, 0.05 * var, 0.08, 0.87, kind, nu, 1.0)


def fit_garch(window_losses, innovation="normal", start=None, restarts=3, seed=0,
              tol=1e-8, maxfev=4000):
    """Maximum likelihood AR(1)-GARCH(1,1) fit.

    Parameters
    ----------
    window_losses : array_like
        At least 100 finite losses.
    innovation : str or InnovationKind
    start : GarchSpec, optional
        Warm start (e.g. yesterday's estimate).
    restarts : int
        Extra Nelder-Mead runs from randomly perturbed starts.
    seed : int
        Seed for the perturbations.

    Returns
    -------
    GarchSpec
        Never worse in likelihood than :func:`constant_vol_spec`; the fallback
        itself is returned (flagged) if no optimiser run beats it.
    """
    x = np.ascontiguousarray(window_losses, dtype=float)
    if x.size < 100:
        raise FitError(f"window needs at least 100 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FitError("window contains non-finite losses")
    kind = InnovationKind.parse(innovation)
    fallback = constant_vol_spec(x, kind)  # raises on a degenerate window
    s2init = float(np.var(x))
    scale = math.sqrt(s2init)
    code = kind.code
    nll_theta = core.garch_nll_theta

    def objective(theta):
        v = nll_theta(x, theta, s2init, scale, code)
        return v if v < 1e300 else 1e300

    starts = [_pack(start if start is not None else _default_start(x, kind), kind, scale)]
    rng = np.random.default_rng(seed)
    for _ in range(int(restarts)):
        starts.append(starts[0] + rng.normal(0.0, 0.5, starts[0].size))

    best_theta, best_val = None, math.inf
    for th0 in starts:
        res = optimize.minimize(objective, th0, method="Nelder-Mead",
                                options={"xatol": 1e-6, "fatol": tol, "maxfev": maxfev,
                                         "adaptive": th0.size > 5})
        if res.fun < best_val:
            best_theta, best_val = res.x, float(res.fun)

    if best_theta is None or not best_val < -fallback.loglik:
        return fallback
    phi0, phi1, a0, a1, b1, nu, gam = _unpack(best_theta, kind, scale)
    if not a0 > _VAR_FLOOR * s2init:
        # exp(theta2) underflowed: floor the intercept and re-score
        a0 = _VAR_FLOOR * s2init
        spec = GarchSpec(phi0, phi1, a0, a1, b1, kind, nu, gam)
        ll = -spec.nll(x, s2init)
        if not ll > fallback.loglik:
            return fallback
        return replace(spec, loglik=ll)
    return GarchSpec(phi0, phi1, a0, a1, b1, kind, nu, gam, loglik=-best_val)

"""
Risk of the standardised innovation: fully parametric (FP), filtered
historical simulation (FHS) and peaks-over-threshold (EVT) estimators.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy import optimize

from ebacktest.exceptions import DomainError, FitError
from ebacktest.forecast.distributions import Empirical, Innovation, SplicedGPD, risk_values

__all__ = ["TailEstimator", "fit_gpd", "gpd_mle", "gpd_pwm", "evt_distribution", "innovation_risk"]

MIN_EXCEEDANCES = 10


class TailEstimator(enum.Enum):
    FP = "FP"
    FHS = "FHS"
    EVT = "EVT"
    OPT = "opt"

    @classmethod
    def parse(cls, name) -> "TailEstimator":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper()
        for member in cls:
            if member.value.upper() == key:
                return member
        raise ValueError(f"unknown tail estimator {name!r}")


def gpd_pwm(y):
    """Probability-weighted-moment estimates ``(xi, beta)`` for GPD excesses."""
    y = np.sort(np.asarray(y, dtype=float))
    n = y.size
    b0 = y.mean()
    # b1 = E[Y (1 - F(Y))] estimated with plotting positions
    w = (n - np.arange(1, n + 1)) / (n - 1.0)
    b1 = float(np.mean(w * y))
    xi = 2.0 - b0 / (b0 - 2.0 * b1)
    beta = 2.0 * b0 * b1 / (b0 - 2.0 * b1)
    return float(xi), float(beta)


def _profile_loglik(theta, y):
    """GPD log-likelihood profiled over the scale, as a function of ``xi/beta``.

    With ``theta = xi / beta`` the MLE of ``xi`` given ``theta`` is
    ``mean(log1p(theta y))``; ``theta = 0`` is the exponential limit.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.mean(np.log1p(np.outer(theta, y)), axis=1)
        ll = -y.size * (np.log(xi / theta) + xi + 1.0)
    expo = theta == 0.0
    if np.any(expo):
        ll[expo] = -y.size * (math.log(y.mean()) + 1.0)
        xi[expo] = 0.0
    ll[~np.isfinite(ll) | (xi <= -1.0)] = -np.inf
    return ll, xi


def gpd_mle(excesses):
    """GPD ``(xi, beta)`` by maximum likelihood over the profile in ``xi/beta``.

    A coarse grid locates the maximum, bounded Brent refines it.  The search
    is restricted to ``xi > -1``, where the likelihood is bounded.
    """
    y = np.asarray(excesses, dtype=float)
    ybar, ymax = float(y.mean()), float(y.max())
    lo = -1.0 / ymax
    # dense near both ends of the negative range and around zero
    u = np.concatenate([1.0 - np.logspace(-8, -0.3, 30), np.logspace(-0.3, -6, 30)])
    pos = np.logspace(-6, 4, 80) / ybar
    grid = np.sort(np.concatenate([lo * u, [0.0], pos]))
    ll, _ = _profile_loglik(grid, y)
    i = int(np.argmax(ll))
    if not np.isfinite(ll[i]):
        raise FitError("GPD likelihood is not finite on the search grid")
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    best = grid[i]
    if b > a:
        res = optimize.minimize_scalar(lambda t: -_profile_loglik(t, y)[0][0], bounds=(a, b),
                                       method="bounded", options={"xatol": 1e-10 / ybar})
        if res.success and -res.fun >= ll[i]:
            best = float(res.x)
    _, xi = _profile_loglik(best, y)
    xi = float(xi[0])
    beta = ybar if best == 0.0 else xi / best
    return xi, float(beta)


def fit_gpd(excesses):
    """GPD ``(xi, beta)`` by maximum likelihood, PWM if the MLE is unusable.

    The MLE is rejected when it fails, gives a non-positive scale or
    ``xi >= 1`` (infinite mean, so ES would not exist).
    """
    y = np.asarray(excesses, dtype=float)
    if y.size < MIN_EXCEEDANCES:
        raise DomainError(f"only {y.size} exceedances; need {MIN_EXCEEDANCES}")
    if not np.all(y >= 0.0) or not np.any(y > 0.0):
        raise FitError("excesses must be non-negative and not all zero")
    try:
        xi, beta = gpd_mle(y)
        if np.isfinite(xi) and beta > 0.0 and xi < 1.0:
            return xi, beta
    except FitError:
        pass
    xi, beta = gpd_pwm(y)
    if not (beta > 0.0 and xi < 1.0 and np.isfinite(xi)):
        raise FitError(f"GPD fit failed (xi={xi}, beta={beta})")
    return xi, beta


def evt_distribution(residuals, threshold_quantile=0.9):
    """Spliced empirical/GPD distribution of the residuals."""
    z = np.asarray(residuals, dtype=float)
    if not 0.8 < threshold_quantile < 0.99:
        raise DomainError("EVT threshold quantile must lie in (0.8, 0.99)")
    u = float(np.quantile(z, threshold_quantile))
    xi, beta = fit_gpd(z[z > u] - u)
    return SplicedGPD(z, u, xi, beta)


def innovation_risk(residuals, estimator, kind, p, dist: Innovation | None = None,
                    rng=None, fhs_draws=10_000, threshold_quantile=0.9):
    """Standardised risk ``(r, z)`` of the innovation for a functional kind.

    Parameters
    ----------
    residuals : array_like
        Standardised residuals ``(L - mu) / sigma`` over the window.
    estimator : TailEstimator or str
        ``FP`` and ``OPT`` use ``dist`` in closed form; ``FHS`` bootstraps
        ``fhs_draws`` residuals; ``EVT`` splices a GPD tail at the
        ``threshold_quantile`` residual quantile.
    kind : kernels.Kind
    p : float
    """
    est = TailEstimator.parse(estimator)
    if not 0.0 < p < 1.0:
        raise DomainError(f"level p must lie in (0, 1), got {p}")
    if est in (TailEstimator.FP, TailEstimator.OPT):
        if dist is None:
            raise DomainError("parametric estimator needs an innovation distribution")
        return risk_values(dist, kind, p)
    z = np.asarray(residuals, dtype=float)
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise DomainError("residuals must be finite and non-empty")
    if est is TailEstimator.FHS:
        rng = np.random.default_rng() if rng is None else rng
        draws = z[rng.integers(0, z.size, size=int(fhs_draws))]
        return risk_values(Empirical(draws), kind, p)
    return risk_values(evt_distribution(z, threshold_quantile), kind, p)

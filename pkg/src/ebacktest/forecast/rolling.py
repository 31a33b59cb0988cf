"""
Rolling-window one-step-ahead risk forecasts.

For each day ``t`` the model is fitted on ``losses[t - window : t]`` and the
forecast is ``mu_t + sigma_t rho(Z)``, so the value at ``t`` never depends on
``losses[t:]``.  Variance-type coordinates (the variance of the mean-variance
pair, the variantile) scale with ``sigma_t^2`` and ignore ``mu_t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ebacktest.exceptions import DomainError, FitError
from ebacktest.forecast.garch import GarchSpec, InnovationKind, fit_garch
from ebacktest.forecast.tail import TailEstimator, innovation_risk
from ebacktest.kernels import Kind, RiskFunctional

__all__ = ["ForecastMethod", "ForecastSeries", "rolling_forecast", "rolling_roster", "oracle_forecast",
           "MAX_MISSING_FRACTION"]

MAX_MISSING_FRACTION = 0.01

_PREFIX = {InnovationKind.NORMAL: "n", InnovationKind.STUDENT_T: "t", InnovationKind.SKEWED_T: "st"}


@dataclass(frozen=True)
class ForecastMethod:
    """Innovation assumption plus tail estimator, e.g. ``st-FHS``.

    Parameters
    ----------
    innovation : InnovationKind
    estimator : TailEstimator
    window : int
        Rolling window length (>= 100).
    fhs_draws : int
        Bootstrap draws per day for FHS.
    threshold_quantile : float
        EVT threshold as a residual quantile, in (0.8, 0.99).
    refit_every : int
        Re-estimate the GARCH parameters every this many days; between refits
        the last estimate is filtered forward.  1 refits daily.
    restarts : int
        Random restarts for the first fit; later fits are warm-started.
    """

    innovation: InnovationKind = InnovationKind.NORMAL
    estimator: TailEstimator = TailEstimator.FP
    window: int = 500
    fhs_draws: int = 10_000
    threshold_quantile: float = 0.9
    refit_every: int = 1
    restarts: int = 3

    def __post_init__(self):
        object.__setattr__(self, "innovation", InnovationKind.parse(self.innovation))
        object.__setattr__(self, "estimator", TailEstimator.parse(self.estimator))
        if self.window < 100:
            raise DomainError(f"window must be >= 100, got {self.window}")
        if not 0.8 < self.threshold_quantile < 0.99:
            raise DomainError("threshold_quantile must lie in (0.8, 0.99)")
        if self.refit_every < 1 or self.fhs_draws < 1:
            raise DomainError("refit_every and fhs_draws must be positive")

    @property
    def name(self):
        if self.estimator is TailEstimator.OPT:
            return "opt"
        return f"{_PREFIX[self.innovation]}-{self.estimator.value}"

    @classmethod
    def parse(cls, name, **kwargs) -> "ForecastMethod":
        """``"n-FP"``, ``"t-EVT"``, ``"st-FHS"``, ``"opt"``..."""
        s = str(name).strip()
        if s.lower() == "opt":
            return cls(InnovationKind.NORMAL, TailEstimator.OPT, **kwargs)
        head, sep, tail = s.partition("-")
        if not sep:
            raise ValueError(f"method name {name!r} must look like 'n-FP'")
        return cls(InnovationKind.parse(head), TailEstimator.parse(tail), **kwargs)


@dataclass
class ForecastSeries:
    """Forecasts aligned with ``losses[t]`` for the day indices ``t``."""

    t: np.ndarray
    r: np.ndarray
    z: np.ndarray | None
    method: str
    functional: RiskFunctional
    missing: np.ndarray = field(default=None)
    specs: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.missing is None:
            self.missing = np.zeros(self.t.size, dtype=bool)

    def __len__(self):
        return int(self.t.size)

    @property
    def level(self):
        return self.functional.level

    @property
    def missing_fraction(self):
        return float(self.missing.mean()) if self.t.size else 0.0


def _is_scale2(kind):
    return kind in (Kind.MEAN_VARIANCE, Kind.EXPECTILE_VARIANTILE)


def _transform(kind, mu, sigma, rho_r, rho_z):
    if _is_scale2(kind):
        r = sigma * sigma * rho_r
    else:
        r = mu + sigma * rho_r
    z = None if rho_z is None else mu + sigma * rho_z
    return r, z


def _as_functional(functional, p):
    if isinstance(functional, RiskFunctional):
        return functional
    return RiskFunctional(Kind.parse(functional), p)


def _day_rng(seed, t):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(t)])))


def _fit_group(x, days, innovation, window, refit_every, restarts, seed):
    """Daily GARCH states shared by every method with the same innovation.

    Yields ``(i, t, spec, failed)``; ``spec`` is the latest successful fit
    (``None`` until the first one succeeds).
    """
    spec: GarchSpec | None = None
    for i, t in enumerate(days):
        failed = False
        if spec is None or i % refit_every == 0:
            try:
                spec = fit_garch(x[t - window:t], innovation, start=spec,
                                 restarts=restarts if spec is None else 0, seed=seed)
            except FitError:
                failed = True
        yield i, int(t), spec, failed


def rolling_roster(losses, methods, functional, p=None, seed=0, start=None):
    """Forecast series for several methods, sharing GARCH fits.

    Methods with the same innovation assumption, window, refit schedule and
    restart count reuse one fit per day; only the tail estimation differs.
    Returns a dict keyed by method name, in input order.
    """
    methods = [m if isinstance(m, ForecastMethod) else ForecastMethod.parse(m) for m in methods]
    for m in methods:
        if m.estimator is TailEstimator.OPT:
            raise DomainError("the opt forecaster needs the generator state; use oracle_forecast")
    func = _as_functional(functional, p)
    x = np.ascontiguousarray(losses, dtype=float)
    groups = {}
    for m in methods:
        groups.setdefault((m.innovation, m.window, m.refit_every, m.restarts), []).append(m)
    out = {}
    for (innovation, w, every, restarts), members in groups.items():
        first = w if start is None else max(int(start), w)
        days = np.arange(first, x.size, dtype=np.int64)
        n = days.size
        r = {m.name: np.full(n, np.nan) for m in members}
        z = {m.name: (np.full(n, np.nan) if func.dimension == 2 else None) for m in members}
        missing = {m.name: np.zeros(n, dtype=bool) for m in members}
        specs = []
        rho_fp, last = None, None
        for i, t, spec, failed in _fit_group(x, days, innovation, w, every, restarts, seed):
            if spec is None:
                for m in members:
                    missing[m.name][i] = True
                continue
            if spec is not last:
                specs.append((t, spec))
                rho_fp, last = None, spec
            win = x[t - w:t]
            mu, sigma = spec.one_step(win)
            resid = None
            for m in members:
                key = m.name
                if failed:
                    missing[key][i] = True
                try:
                    if m.estimator is TailEstimator.FP:
                        if rho_fp is None:
                            rho_fp = innovation_risk(None, m.estimator, func.kind, func.level,
                                                     spec.distribution())
                        rho = rho_fp
                    else:
                        if resid is None:
                            resid = spec.residuals(win)
                        rho = innovation_risk(resid, m.estimator, func.kind, func.level,
                                              rng=_day_rng(seed, t), fhs_draws=m.fhs_draws,
                                              threshold_quantile=m.threshold_quantile)
                except (FitError, DomainError):
                    # keep yesterday's value, flagged
                    missing[key][i] = True
                    if i > 0:
                        r[key][i] = r[key][i - 1]
                        if z[key] is not None:
                            z[key][i] = z[key][i - 1]
                    continue
                ri, zi = _transform(func.kind, mu, sigma, *rho)
                r[key][i] = ri
                if z[key] is not None:
                    z[key][i] = zi
        for m in members:
            miss = missing[m.name]
            if n and miss.mean() > MAX_MISSING_FRACTION:
                raise FitError(f"{int(miss.sum())} of {n} windows failed for {m.name}")
            out[m.name] = ForecastSeries(days, r[m.name], z[m.name], m.name, func, miss, specs)
    return {m.name: out[m.name] for m in methods}


def rolling_forecast(losses, method, functional, p=None, window=None, seed=0, start=None):
    """One-step-ahead forecasts over ``t = window .. len(losses) - 1``.

    Parameters
    ----------
    losses : array_like
    method : ForecastMethod or str
        ``"opt"`` is not available here; use :func:`oracle_forecast`.
    functional : RiskFunctional or str
    p : float, optional
        Level when ``functional`` is given by name.
    window : int, optional
        Overrides ``method.window``.
    seed : int
        Run seed; FHS draws on day ``t`` use the stream ``(seed, t)``.
    start : int, optional
        First forecast day (defaults to the window length).

    Raises
    ------
    FitError
        When more than 1% of the windows fail to fit.
    """
    if not isinstance(method, ForecastMethod):
        method = ForecastMethod.parse(method)
    if window is not None:
        method = replace(method, window=int(window))
    return rolling_roster(losses, [method], functional, p, seed, start)[method.name]


def oracle_forecast(mu, sigma, dist, functional, p=None, start=0):
    """The ``opt`` forecaster: true ``mu_t + sigma_t rho(Z)`` from the generator.

    ``mu`` and ``sigma`` are the conditional mean and volatility of each day
    (possibly time-varying distributions are passed as a sequence).
    """
    func = _as_functional(functional, p)
    mu = np.asarray(mu, dtype=float)[start:]
    sigma = np.asarray(sigma, dtype=float)[start:]
    days = np.arange(start, start + mu.size, dtype=np.int64)
    if isinstance(dist, (list, tuple)):
        dists = list(dist)[start:]
    else:
        dists = [dist] * mu.size
    cache = {}
    r = np.empty(mu.size)
    z = np.empty(mu.size) if func.dimension == 2 else None
    for i, d in enumerate(dists):
        key = id(d)
        if key not in cache:
            cache[key] = innovation_risk(None, TailEstimator.OPT, func.kind, func.level, d)
        ri, zi = _transform(func.kind, mu[i], sigma[i], *cache[key])
        r[i] = ri
        if z is not None:
            z[i] = zi
    return ForecastSeries(days, r, z, "opt", func, None, [])

"""
Predictable betting fractions.

The single-observation rules (:func:`grel_taylor`, :func:`grel_exact`) work
on a history of e-factors ``f_s``; :func:`plan_lambdas` is the batch driver
used by the backtests, which re-evaluates the loss history at each day's
forecasts (the plug-in rule) through the numerical core.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ebacktest import _formulas as fm
from ebacktest._corelib import core

__all__ = [
    "Method",
    "BettingConfig",
    "gamma_bound",
    "grel_taylor",
    "grel_exact",
    "plan_lambdas",
]


class Method(enum.Enum):
    GREL_EXACT = "GrelExact"
    GREL_TAYLOR = "GrelTaylor"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        if key in ("grelexact", "exact"):
            return cls.GREL_EXACT
        if key in ("greltaylor", "taylor"):
            return cls.GREL_TAYLOR
        raise ValueError(f"unknown betting method {name!r}")


@dataclass(frozen=True)
class BettingConfig:
    """Betting rule settings.

    Parameters
    ----------
    method : Method
        Exact empirical log-wealth maximiser or its Taylor approximation.
    c : float
        Truncation level in (0, 1]; the bet never exceeds ``c * gamma_t``.
    warmup : int
        Bets are zero while fewer than ``warmup`` past losses are available.
    grid_size : int
        Dense-grid size for the exact rule; 0 selects golden-section search.
    plugin : {"latest", "realized"}
        ``"latest"`` re-evaluates the whole history at today's forecasts;
        ``"realized"`` uses the factors realised under each day's own forecasts.
    max_lambda : float
        Hard ceiling replacing ``c * inf`` when the payoff is bounded below by 0.
    tol : float
        Golden-section tolerance.
    reset_history : bool
        Restart the betting history at prespecified restart times.
    """

    method: Method = Method.GREL_TAYLOR
    c: float = 0.5
    warmup: int = 1
    grid_size: int = 0
    plugin: str = "latest"
    max_lambda: float = 1e3
    tol: float = 1e-6
    reset_history: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"truncation c must lie in (0, 1], got {self.c}")
        if int(self.warmup) < 1:
            raise ValueError(f"warmup must be >= 1, got {self.warmup}")
        if self.plugin not in ("latest", "realized"):
            raise ValueError(f"plugin must be 'latest' or 'realized', got {self.plugin!r}")
        if not self.max_lambda > 0.0:
            raise ValueError("max_lambda must be positive")
        if self.grid_size < 0:
            raise ValueError("grid_size must be >= 0")


def gamma_bound(history_free_inf):
    """Feasibility bound from the infimum of the e-factor over the loss domain.

    Returns ``inf`` when ``inf f >= 1`` and ``-1 / (inf f - 1)`` otherwise.
    Accepts scalars or arrays.
    """
    f = np.asarray(history_free_inf, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(f >= 1.0, np.inf, -1.0 / np.where(f >= 1.0, 0.0, f - 1.0))
    return float(out) if out.ndim == 0 else out


def _cap(gamma_t, c, max_lambda=math.inf):
    cap = c * gamma_t
    return min(cap, max_lambda)


def grel_taylor(evalue_history, gamma_t, c=0.5):
    """Taylor-approximated bet ``0 v sum(f-1) / sum((f-1)^2) ^ c gamma_t``."""
    g = np.asarray(evalue_history, dtype=float) - 1.0
    if g.size == 0:
        return 0.0
    s2 = float(np.dot(g, g))
    s1 = float(g.sum())
    if s2 == 0.0 or s1 <= 0.0:
        return 0.0
    return min(s1 / s2, _cap(gamma_t, c))


def grel_exact(evalue_history, gamma_t, c=0.5, tol=1e-6, grid_size=0, max_lambda=1e3):
    """Maximise the empirical log growth ``mean(log(1 - lam + lam f))``.

    The search interval is ``[0, min(c gamma_t, max_lambda)]``.  Golden-section
    search is used by default (the objective is concave); a dense grid when
    ``grid_size > 0``.  A flat or non-improving objective returns 0.
    """
    g = np.ascontiguousarray(np.asarray(evalue_history, dtype=float) - 1.0)
    cap = _cap(gamma_t, c, max_lambda)
    if g.size == 0 or cap <= 0.0:
        return 0.0
    if grid_size > 0:
        lam = np.linspace(0.0, cap, int(grid_size) + 1)
        f = 1.0 + np.outer(lam, g)
        with np.errstate(divide="ignore", invalid="ignore"):
            obj = np.where(np.all(f > 0.0, axis=1), np.log(np.where(f > 0, f, 1.0)).sum(axis=1), -np.inf)
        i = int(np.argmax(obj))
        return float(lam[i]) if obj[i] > obj[0] else 0.0
    return float(core.grel_argmax(g, cap, tol))


def _windows(n, prefix, warmup, starts):
    """History bounds ``[lo, hi)`` in prefix-extended coordinates.

    ``starts`` lists the day indices where the history restarts (the first
    segment always keeps the prefix).
    """
    t = np.arange(n, dtype=np.int64)
    hi = t + prefix
    lo = np.zeros(n, dtype=np.int64)
    for s in starts:
        if s > 0:
            lo[s:] = s + prefix
    lo = np.minimum(lo, hi)
    active = (hi - lo) >= warmup
    return lo, hi, active


def plan_lambdas(code, p, m, x, r, z, rs, zs, sign, cap, config: BettingConfig,
                 prefix=None, history_starts=()):
    """Bets for a whole run.

    Parameters
    ----------
    code, p, m : kernel code, level and support bound passed to the core.
    x : array, evaluation losses.
    r, z, rs, zs : arrays, today's forecasts (``rs``/``zs`` only for scores).
    sign : +1 or -1, orientation of a score gap.
    cap : array, per-day upper bound ``c * gamma_t`` (already truncated).
    prefix : array, optional
        Losses observed before the evaluation period; they enter the betting
        history but are never bet on.
    history_starts : sequence of int
        Day indices at which the betting history is cleared.

    Returns
    -------
    numpy.ndarray of bets, zero during warmup.
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = x.size
    if n == 0:
        return np.zeros(0)
    pre = np.zeros(0) if prefix is None else np.ascontiguousarray(prefix, dtype=float)
    cap = np.ascontiguousarray(np.minimum(cap, config.max_lambda), dtype=float)
    starts = tuple(history_starts) if config.reset_history else ()
    lam = np.zeros(n)
    if config.plugin == "realized":
        # factors realised at their own forecasts, accumulated per history window
        g = core.payoffs(code, p, m, x, r, z, rs, zs, sign)
        lo, hi, active = _windows(n, 0, config.warmup, starts)
        if config.method is Method.GREL_TAYLOR:
            c1 = np.concatenate([[0.0], np.cumsum(g)])
            c2 = np.concatenate([[0.0], np.cumsum(g * g)])
            s1 = c1[hi] - c1[lo]
            s2 = c2[hi] - c2[lo]
            with np.errstate(divide="ignore", invalid="ignore"):
                raw = np.where((s2 > 0) & (s1 > 0), s1 / np.where(s2 > 0, s2, 1.0), 0.0)
            lam = np.where(active, np.minimum(raw, cap), 0.0)
        else:
            for t in np.flatnonzero(active):
                lam[t] = grel_exact(1.0 + g[lo[t]:hi[t]], cap[t], 1.0, config.tol,
                                    config.grid_size, config.max_lambda)
        return lam
    xall = np.ascontiguousarray(np.concatenate([pre, x]))
    lo, hi, active = _windows(n, pre.size, config.warmup, starts)
    lo = np.where(active, lo, hi)
    if config.method is Method.GREL_TAYLOR:
        s1, s2 = core.history_moments(code, p, m, xall, lo, hi, r, z, rs, zs, sign)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.where((s2 > 0) & (s1 > 0), s1 / np.where(s2 > 0, s2, 1.0), 0.0)
        return np.where(active, np.minimum(raw, cap), 0.0)
    if config.grid_size > 0:
        for t in np.flatnonzero(active):
            g = fm.payoff(code, xall[lo[t]:hi[t]], r[t], z[t], rs[t], zs[t], p, m, sign)
            lam[t] = grel_exact(1.0 + g, cap[t], 1.0, config.tol, config.grid_size, config.max_lambda)
        return lam
    return core.history_grel(code, p, m, xall, lo, hi, r, z, rs, zs, sign, cap, config.tol)

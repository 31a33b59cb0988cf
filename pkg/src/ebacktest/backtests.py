"""
Standard and comparative e-backtests over aligned loss/forecast series.

A standard backtest runs one e-process on identification values; a
comparative backtest runs ``M^-`` (internal forecasts conditionally
dominate the standard ones) and ``M^+`` (the reverse) side by side and
reads a zone off their suprema.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ebacktest import kernels as kn
from ebacktest._corelib import core
from ebacktest.betting import BettingConfig, gamma_bound, plan_lambdas
from ebacktest.eprocess import (
    EProcessRun,
    HitStatistics,
    RestartPolicy,
    hit_statistics,
    run_pair_path,
    run_path,
)
from ebacktest.exceptions import AlignmentError, DomainError

__all__ = [
    "Zone",
    "Dominance",
    "ZoneVerdict",
    "BacktestInput",
    "StandardResult",
    "ComparativeResult",
    "HeatmapResult",
    "classify_zone",
    "run_standard",
    "run_comparative",
    "heatmap",
    "support_bound_from_warmup",
    "DEFAULT_THRESHOLDS",
]

DEFAULT_THRESHOLDS = (2.0, 5.0, 10.0)


class Zone(enum.Enum):
    GREEN = "Green"
    RED = "Red"
    ORANGE = "Orange"
    YELLOW = "Yellow"


class Dominance(enum.Enum):
    INTERNAL = "InternalWeaklyDominates"
    STANDARD = "StandardWeaklyDominates"
    TIE = "Tie"


@dataclass(frozen=True)
class ZoneVerdict:
    zone: Zone
    sup_minus: float
    sup_plus: float
    tau_minus: int | None
    tau_plus: int | None
    dominance_magnitude: Dominance
    dominance_speed: Dominance
    alpha: float

    @property
    def rejected_minus(self) -> bool:
        return self.sup_minus >= 1.0 / self.alpha

    @property
    def rejected_plus(self) -> bool:
        return self.sup_plus >= 1.0 / self.alpha

    def to_dict(self) -> dict:
        return {
            "zone": self.zone.value,
            "sup_minus": self.sup_minus,
            "sup_plus": self.sup_plus,
            "tau_minus": self.tau_minus,
            "tau_plus": self.tau_plus,
            "dominance_magnitude": self.dominance_magnitude.value,
            "dominance_speed": self.dominance_speed.value,
            "alpha": self.alpha,
        }


def classify_zone(sup_minus, sup_plus, tau_minus=None, tau_plus=None, alpha=0.1) -> ZoneVerdict:
    """Modified three-zone rule.

    Red when only ``H^-`` is rejected, Green when only ``H^+`` is, Orange
    when both are and ``sup M^- > sup M^+``, Yellow otherwise.  Magnitude
    dominance compares the suprema (a larger ``sup M^-`` favours the standard
    forecasts); speed dominance compares first hitting times of ``1/alpha``
    with ``None`` read as never.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    thr = 1.0 / alpha
    rej_m, rej_p = sup_minus >= thr, sup_plus >= thr
    if rej_m and not rej_p:
        zone = Zone.RED
    elif rej_p and not rej_m:
        zone = Zone.GREEN
    elif rej_m and rej_p and sup_minus > sup_plus:
        zone = Zone.ORANGE
    else:
        zone = Zone.YELLOW
    if sup_minus < sup_plus:
        mag = Dominance.INTERNAL
    elif sup_minus > sup_plus:
        mag = Dominance.STANDARD
    else:
        mag = Dominance.TIE
    tm = math.inf if tau_minus is None else tau_minus
    tp = math.inf if tau_plus is None else tau_plus
    if tm > tp:
        speed = Dominance.INTERNAL
    elif tm < tp:
        speed = Dominance.STANDARD
    else:
        speed = Dominance.TIE
    return ZoneVerdict(zone, float(sup_minus), float(sup_plus), tau_minus, tau_plus, mag, speed, alpha)


def _vec(a):
    if a is None:
        return None
    return np.ascontiguousarray(np.asarray(a, dtype=float).ravel())


@dataclass
class BacktestInput:
    """Aligned inputs of a backtest; forecast ``t`` predicts loss ``t``.

    ``prefix`` holds losses observed before the evaluation period.  They are
    part of the betting history but are not bet on.
    """

    losses: np.ndarray
    r: np.ndarray
    functional: kn.RiskFunctional
    z: np.ndarray | None = None
    r_star: np.ndarray | None = None
    z_star: np.ndarray | None = None
    alpha: float = 0.1
    betting: BettingConfig = field(default_factory=BettingConfig)
    restart: RestartPolicy = field(default_factory=RestartPolicy)
    variant: kn.Variant = kn.Variant.RATIO
    homogeneity: kn.Homogeneity | None = None
    two_sided: bool = False
    prefix: np.ndarray | None = None
    thresholds: tuple = DEFAULT_THRESHOLDS

    def __post_init__(self):
        self.losses = _vec(self.losses)
        self.r, self.z = _vec(self.r), _vec(self.z)
        self.r_star, self.z_star = _vec(self.r_star), _vec(self.z_star)
        self.prefix = _vec(self.prefix)
        n = self.losses.size
        for name in ("r", "z", "r_star", "z_star"):
            v = getattr(self, name)
            if v is not None and v.size != n:
                raise AlignmentError(f"{name} has {v.size} rows, losses have {n}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if (self.z_star is None) != (self.z is None) and self.r_star is not None:
            raise AlignmentError("internal and standard forecasts must have the same dimension")

    @property
    def n(self) -> int:
        return int(self.losses.size)


@dataclass
class StandardResult:
    run: EProcessRun
    rejected: bool
    first_hit: int | None
    stats: HitStatistics
    alpha: float
    thresholds: tuple

    def __iter__(self):
        return iter((self.run, self.rejected, self.first_hit))

    def by_threshold(self):
        out = []
        w = self.run.wealth
        for thr in self.thresholds:
            hit = np.flatnonzero(w >= thr)
            out.append({"threshold": float(thr), "rejected": bool(hit.size),
                        "first_hit": int(hit[0]) + 1 if hit.size else None})
        return out

    def to_dict(self) -> dict:
        return {
            "rejected": self.rejected,
            "alpha": self.alpha,
            "sup": self.stats.sup,
            "first_hit": self.first_hit,
            "hit_count": self.stats.hit_count,
            "final_e_value": self.run.final_wealth(),
            "segments": [
                {"start": a, "end": b, "sup": s, "first_hit": h}
                for (a, b), s, h in zip(self.stats.segment_bounds, self.stats.segment_sups,
                                        self.stats.segment_first_hits)
            ],
            "thresholds": self.by_threshold(),
        }


def _zeros_like(a):
    return np.zeros_like(a)


def _validate_prefix(kernel, inp):
    if inp.prefix is None or inp.prefix.size == 0 or inp.n == 0:
        return
    z0 = None if inp.z is None else inp.z[:1]
    try:
        kernel.validate(inp.prefix, inp.r[:1], z0)
    except DomainError as exc:
        raise DomainError(f"history prefix: {exc.detail}", row=exc.row) from None


def _empty_run(inp, two=False):
    e = np.zeros(0)
    return EProcessRun(e, e, None if inp.z is None else e, e, e, e, np.zeros(0, dtype=np.int64),
                       payoff2=e if two else None, log_wealth2=e if two else None)


def run_standard(inp: BacktestInput) -> StandardResult:
    """One-sided (or two-sided) standard e-backtest of ``inp.r`` (and ``inp.z``).

    Bets follow ``inp.betting`` and are capped at ``min(c gamma_t, 1)``.
    Rejection means ``sup_t M_t >= 1/alpha``.
    """
    f = inp.functional
    kernel = kn.IdentificationKernel(f, inp.variant)
    if inp.two_sided:
        if f.dimension != 1:
            raise DomainError("the two-sided mixture is defined for one-dimensional functionals")
        partner = kernel.partner()
    n = inp.n
    thr = 1.0 / inp.alpha
    if n == 0:
        run = _empty_run(inp, inp.two_sided)
        stats = hit_statistics(run, thr)
        return StandardResult(run, False, None, stats, inp.alpha, tuple(inp.thresholds))
    x, r, z = kernel.validate(inp.losses, inp.r, inp.z)
    x, r = np.ascontiguousarray(x), np.ascontiguousarray(r)
    zz = np.ascontiguousarray(r if z is None else z)
    _validate_prefix(kernel, inp)
    p, m = f.level, 0.0 if f.M is None else f.M
    cfg = inp.betting
    starts = inp.restart.fixed_starts(n)
    gamma = gamma_bound(1.0 + kernel.infimum(r, z))
    cap = np.minimum(cfg.c * gamma, 1.0)
    dummy = _zeros_like(r)
    lam = plan_lambdas(kernel.code, p, m, x, r, zz, dummy, dummy, 1.0, cap, cfg, inp.prefix, starts)
    g = core.payoffs(kernel.code, p, m, x, r, zz, dummy, dummy, 1.0)
    if inp.two_sided:
        cap2 = np.minimum(cfg.c * gamma_bound(1.0 + partner.infimum(r)), 1.0)
        lam2 = plan_lambdas(partner.code, p, m, x, r, zz, dummy, dummy, -1.0, cap2, cfg,
                            inp.prefix, starts)
        lam = np.minimum(np.maximum(lam, lam2), np.minimum(cap, cap2))
        g2 = core.payoffs(partner.code, p, m, x, r, zz, dummy, dummy, -1.0)
        la, lb, seg = run_pair_path(lam, g, lam, g2, inp.restart, mix=True)
        run = EProcessRun(x, r, z, lam, g, la, seg, payoff2=g2, log_wealth2=lb)
    else:
        logw, seg = run_path(lam, g, inp.restart)
        run = EProcessRun(x, r, z, lam, g, logw, seg)
    stats = hit_statistics(run, thr)
    rejected = stats.sup >= thr
    return StandardResult(run, bool(rejected), stats.first_hit, stats, inp.alpha, tuple(inp.thresholds))


@dataclass
class ComparativeResult:
    run_minus: EProcessRun
    run_plus: EProcessRun
    verdict: ZoneVerdict
    segment_verdicts: tuple
    stats_minus: HitStatistics
    stats_plus: HitStatistics
    thresholds: tuple

    def __iter__(self):
        return iter((self.run_minus, self.run_plus, self.verdict))

    def verdict_at(self, threshold, segment=None) -> ZoneVerdict:
        """Verdict at another rejection threshold (``alpha = 1/threshold``)."""
        if segment is None:
            segment = len(self.segment_verdicts) - 1
        return _segment_verdict(self.run_minus, self.run_plus, segment, 1.0 / threshold)

    def to_dict(self) -> dict:
        out = self.verdict.to_dict()
        out["thresholds"] = []
        for thr in self.thresholds:
            v = self.verdict_at(thr)
            out["thresholds"].append({
                "threshold": float(thr),
                "zone": v.zone.value,
                "rejected_minus": v.rejected_minus,
                "rejected_plus": v.rejected_plus,
                "tau_minus": v.tau_minus,
                "tau_plus": v.tau_plus,
            })
        if len(self.segment_verdicts) > 1:
            out["segments"] = []
            for (a, b), v in zip(self.stats_minus.segment_bounds, self.segment_verdicts):
                d = v.to_dict()
                d.update(start=a, end=b)
                out["segments"].append(d)
        return out


def _segment_verdict(run_minus, run_plus, segment, alpha):
    thr = 1.0 / alpha
    mask = run_minus.segment == segment
    if not np.any(mask):
        return classify_zone(1.0, 1.0, None, None, alpha)
    pos = np.flatnonzero(mask)
    wm, wp = run_minus.wealth[pos], run_plus.wealth[pos]
    hm, hp = np.flatnonzero(wm >= thr), np.flatnonzero(wp >= thr)
    tm = int(pos[hm[0]]) + 1 if hm.size else None
    tp = int(pos[hp[0]]) + 1 if hp.size else None
    return classify_zone(max(1.0, float(wm.max())), max(1.0, float(wp.max())), tm, tp, alpha)


def _comparative_kernel(inp):
    f = inp.functional
    if f.M is None:
        raise DomainError("comparative backtests need a support bound M")
    return kn.ScoringKernel(f, inp.homogeneity)


def run_comparative(inp: BacktestInput) -> ComparativeResult:
    """Comparative e-backtest of internal ``(r, z)`` against standard ``(r*, z*)``.

    ``M^-`` bets on ``S(L, R) - S(L, R*)`` and ``M^+`` on its negative, each
    with its own bound ``c gamma_t`` and its own history; restarts are joint.
    With restarts, verdicts are produced per segment and the headline verdict
    is the one of the last segment.
    """
    if inp.r_star is None:
        raise AlignmentError("comparative backtest needs standard forecasts")
    kernel = _comparative_kernel(inp)
    f = inp.functional
    n = inp.n
    thresholds = tuple(inp.thresholds)
    if n == 0:
        e = _empty_run(inp)
        stats = hit_statistics(e, 1.0 / inp.alpha)
        v = classify_zone(1.0, 1.0, None, None, inp.alpha)
        return ComparativeResult(e, e, v, (v,), stats, stats, thresholds)
    x = inp.losses
    kn._check_finite(loss=x)
    kn._check_support(x, f.M)
    if inp.prefix is not None:
        kn._check_finite(loss=inp.prefix)
        kn._check_support(inp.prefix, f.M)
    r, z = kernel.validate_forecasts(inp.r, inp.z, "internal forecast")
    rs, zs = kernel.validate_forecasts(inp.r_star, inp.z_star, "standard forecast")
    zz = np.ascontiguousarray(r if z is None else z)
    zzs = np.ascontiguousarray(rs if zs is None else zs)
    r, rs = np.ascontiguousarray(r), np.ascontiguousarray(rs)
    cfg = inp.betting
    p, m = f.level, f.M
    starts = inp.restart.fixed_starts(n)
    inf_minus = kn.score_gap_infimum(kernel, r, z, rs, zs)
    inf_plus = kn.score_gap_infimum(kernel, rs, zs, r, z)
    cap_m = cfg.c * gamma_bound(1.0 + inf_minus)
    cap_p = cfg.c * gamma_bound(1.0 + inf_plus)
    code = kernel.code
    lam_m = plan_lambdas(code, p, m, x, r, zz, rs, zzs, 1.0, cap_m, cfg, inp.prefix, starts)
    lam_p = plan_lambdas(code, p, m, x, r, zz, rs, zzs, -1.0, cap_p, cfg, inp.prefix, starts)
    g_m = core.payoffs(code, p, m, x, r, zz, rs, zzs, 1.0)
    g_p = core.payoffs(code, p, m, x, r, zz, rs, zzs, -1.0)
    lw_m, lw_p, seg = run_pair_path(lam_m, g_m, lam_p, g_p, inp.restart)
    run_m = EProcessRun(x, r, z, lam_m, g_m, lw_m, seg, rs, zs)
    run_p = EProcessRun(x, r, z, lam_p, g_p, lw_p, seg, rs, zs)
    thr = 1.0 / inp.alpha
    st_m, st_p = hit_statistics(run_m, thr), hit_statistics(run_p, thr)
    segs = tuple(_segment_verdict(run_m, run_p, s, inp.alpha) for s in range(int(seg[-1]) + 1))
    return ComparativeResult(run_m, run_p, segs[-1], segs, st_m, st_p, thresholds)


@dataclass
class HeatmapResult:
    """Pairwise verdicts; ``cells[i][j]`` has standard ``names[i]`` and internal ``names[j]``."""

    names: list
    cells: list
    functional: kn.RiskFunctional
    alpha: float
    thresholds: tuple

    def zones(self):
        return [[c.verdict.zone.value for c in row] for row in self.cells]

    def to_dict(self) -> dict:
        f = self.functional
        out = {
            "functional": f.kind.value,
            "level": f.p,
            "alpha": self.alpha,
            "axes": {"horizontal": "internal", "vertical": "standard"},
            "models": list(self.names),
            "zones": self.zones(),
            "cells": [],
        }
        for i, row in enumerate(self.cells):
            for j, res in enumerate(row):
                d = verdict_record(res, self.names[j], self.names[i], f)
                out["cells"].append(d)
        return out


def verdict_record(result: ComparativeResult, internal: str, standard: str, functional) -> dict:
    """JSON-ready verdict with the model names attached."""
    d = {"internal": internal, "standard": standard, "functional": functional.kind.value,
         "level": functional.p}
    d.update(result.to_dict())
    return d


def heatmap(losses, roster, functional, *, alpha=0.5, betting=None, restart=None,
            homogeneity=None, prefix=None, thresholds=DEFAULT_THRESHOLDS, workers=1) -> HeatmapResult:
    """Run every ordered pair of a roster of forecasts.

    Parameters
    ----------
    losses : array
    roster : dict
        ``name -> r`` or ``name -> (r, z)``; insertion order fixes the axes.
    functional : RiskFunctional
        Must carry the support bound ``M``.
    workers : int
        Thread count for the pairwise cells.
    """
    names = list(roster)
    betting = betting or BettingConfig()
    restart = restart or RestartPolicy()

    def unpack(v):
        if isinstance(v, tuple):
            return v[0], v[1]
        return v, None

    def cell(i, j):
        rs, zs = unpack(roster[names[i]])
        r, z = unpack(roster[names[j]])
        inp = BacktestInput(losses, r, functional, z=z, r_star=rs, z_star=zs, alpha=alpha,
                            betting=betting, restart=restart, homogeneity=homogeneity,
                            prefix=prefix, thresholds=thresholds)
        return run_comparative(inp)

    pairs = [(i, j) for i in range(len(names)) for j in range(len(names))]
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda ij: cell(*ij), pairs))
    else:
        results = [cell(i, j) for i, j in pairs]
    k = len(names)
    cells = [results[i * k:(i + 1) * k] for i in range(k)]
    return HeatmapResult(names, cells, functional, alpha, tuple(thresholds))


def support_bound_from_warmup(losses, warmup, factor=1.5) -> float:
    """``factor * max |loss|`` over the first ``warmup`` losses."""
    w = np.asarray(losses, dtype=float)[: max(int(warmup), 1)]
    if w.size == 0 or not np.all(np.isfinite(w)):
        raise DomainError("cannot derive a support bound from an empty or non-finite warmup window")
    m = float(factor * np.max(np.abs(w)))
    if m <= 0.0:
        raise DomainError("support bound from the warmup window is zero")
    return m


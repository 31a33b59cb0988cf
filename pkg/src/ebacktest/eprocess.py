"""
E-process state, recursions, restart policies and hit statistics.

Wealth is carried in log form with an explicit absorbing-zero flag; the
products over thousands of factors would otherwise overflow or underflow.
The step functions update a state in place (and return it) for streaming
use; whole runs go through :func:`run_path` / :func:`run_pair_path`, which
hand the loop to the numerical core.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ebacktest._corelib import core
from ebacktest.exceptions import InvalidStep
from ebacktest import _core_python

__all__ = [
    "RestartKind",
    "RestartPolicy",
    "EProcessState",
    "TwoSidedState",
    "HitStatistics",
    "EProcessRun",
    "step_standard",
    "step_two_sided",
    "step_comparative",
    "apply_restart",
    "hit_statistics",
    "run_path",
    "run_pair_path",
]

ZERO_TOL = _core_python.ZERO_TOL


class RestartKind(enum.Enum):
    NONE = "None"
    AT_FIXED_TIMES = "AtFixedTimes"
    AT_REJECTION = "AtRejection"


@dataclass(frozen=True)
class RestartPolicy:
    """When to restart an e-process from 1.

    ``times`` are 1-indexed days ``t_i``; the process restarts at ``t_i + 1``.
    ``threshold`` restarts the day after ``M_t >= threshold``.
    """

    kind: RestartKind = RestartKind.NONE
    times: tuple = ()
    threshold: float | None = None

    def __post_init__(self):
        if self.kind is RestartKind.AT_FIXED_TIMES:
            t = tuple(int(v) for v in self.times)
            if any(b <= a for a, b in zip(t, t[1:])) or any(v < 1 for v in t):
                raise ValueError("restart times must be positive and strictly increasing")
            object.__setattr__(self, "times", t)
        if self.kind is RestartKind.AT_REJECTION:
            if self.threshold is None or not self.threshold > 1.0:
                raise ValueError("restart threshold must exceed 1")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def at_fixed_times(cls, times):
        return cls(RestartKind.AT_FIXED_TIMES, tuple(times))

    @classmethod
    def at_rejection(cls, threshold):
        return cls(RestartKind.AT_REJECTION, (), float(threshold))

    @classmethod
    def parse(cls, text: str | None) -> "RestartPolicy":
        """Parse ``none``, ``fixed:2000,3000`` or ``rejection:5``."""
        if text is None or text.strip().lower() in ("", "none"):
            return cls.none()
        head, _, tail = text.partition(":")
        head = head.strip().lower()
        if head in ("fixed", "atfixedtimes"):
            return cls.at_fixed_times(int(v) for v in tail.split(",") if v.strip())
        if head in ("rejection", "atrejection"):
            return cls.at_rejection(float(tail))
        raise ValueError(f"unknown restart policy {text!r}")

    def reset_mask(self, n):
        """Boolean ``reset_before`` array for a run of ``n`` steps (0-indexed)."""
        mask = np.zeros(n, dtype=np.uint8)
        if self.kind is RestartKind.AT_FIXED_TIMES:
            for t in self.times:
                if t < n:
                    mask[t] = 1
        return mask

    def fixed_starts(self, n):
        if self.kind is not RestartKind.AT_FIXED_TIMES:
            return ()
        return tuple(t for t in self.times if t < n)

    @property
    def crossing_threshold(self):
        return self.threshold if self.kind is RestartKind.AT_REJECTION else math.inf

    def describe(self) -> str:
        if self.kind is RestartKind.AT_FIXED_TIMES:
            return "fixed:" + ",".join(str(t) for t in self.times)
        if self.kind is RestartKind.AT_REJECTION:
            return f"rejection:{self.threshold:g}"
        return "none"


@dataclass
class EProcessState:
    """Running e-process.

    ``t`` counts completed steps; ``hit_times`` are 1-indexed days with
    ``M_t >= threshold`` that triggered a restart, and ``segments`` holds the
    1-indexed first day of every segment.
    """

    log_wealth: float = 0.0
    zero: bool = False
    t: int = 0
    lambda_history: list = field(default_factory=list)
    payoff_history: list = field(default_factory=list)
    log_path: list = field(default_factory=list)
    segment_ids: list = field(default_factory=list)
    hit_times: list = field(default_factory=list)
    segments: list = field(default_factory=lambda: [1])

    @property
    def wealth(self) -> float:
        return 0.0 if self.zero else math.exp(self.log_wealth)

    @property
    def segment(self) -> int:
        return len(self.segments) - 1

    def _record(self, lam, g):
        self.t += 1
        self.lambda_history.append(float(lam))
        self.payoff_history.append(float(g))
        self.log_path.append(-math.inf if self.zero else self.log_wealth)
        self.segment_ids.append(self.segment)

    def _advance(self, lam, g):
        f = 1.0 + lam * g
        if f < 0.0:
            if f <= -ZERO_TOL:
                raise InvalidStep(f"factor 1 + lambda*g = {f:.6g} < 0 at t={self.t + 1}")
            f = 0.0
        if f == 0.0:
            self.zero = True
            self.log_wealth = -math.inf
        elif not self.zero:
            self.log_wealth += math.log1p(lam * g)

    def reset(self):
        self.log_wealth = 0.0
        self.zero = False
        self.segments.append(self.t + 1)


def step_standard(state: EProcessState, v_t, lam_t) -> EProcessState:
    """``M_t = M_{t-1} (1 + lam_t V_t)``; needs ``lam_t`` in [0, 1] and ``V_t >= -1``."""
    if not 0.0 <= lam_t <= 1.0:
        raise InvalidStep(f"standard bet must lie in [0, 1], got {lam_t}")
    if v_t < -1.0 - ZERO_TOL:
        raise InvalidStep(f"identification value {v_t} below -1")
    state._advance(lam_t, v_t)
    state._record(lam_t, v_t)
    return state


@dataclass
class TwoSidedState:
    """The two products of the single-dimension two-sided mixture."""

    up: EProcessState = field(default_factory=EProcessState)
    down: EProcessState = field(default_factory=EProcessState)

    @property
    def wealth(self) -> float:
        return 0.5 * (self.up.wealth + self.down.wealth)

    @property
    def log_wealth(self) -> float:
        return float(np.logaddexp(self.up.log_wealth, self.down.log_wealth) - math.log(2.0))

    @property
    def t(self):
        return self.up.t

    def reset(self):
        self.up.reset()
        self.down.reset()


def step_two_sided(pair: TwoSidedState, v_t, v_prime_t, lam_t) -> TwoSidedState:
    """Advance ``prod(1 + lam V)`` and ``prod(1 - lam V')`` together."""
    if not 0.0 <= lam_t <= 1.0:
        raise InvalidStep(f"standard bet must lie in [0, 1], got {lam_t}")
    if v_t < -1.0 - ZERO_TOL or v_prime_t > 1.0 + ZERO_TOL:
        raise InvalidStep("two-sided mixture needs V >= -1 and V' <= 1")
    pair.up._advance(lam_t, v_t)
    pair.down._advance(lam_t, -v_prime_t)
    pair.up._record(lam_t, v_t)
    pair.down._record(lam_t, -v_prime_t)
    return pair


def step_comparative(state: EProcessState, score_gap_t, lam_t) -> EProcessState:
    """``M_t = M_{t-1} (1 + lam_t gap_t)`` for ``M^-`` (pass ``-gap`` for ``M^+``)."""
    if lam_t < 0.0:
        raise InvalidStep(f"bet must be nonnegative, got {lam_t}")
    state._advance(lam_t, score_gap_t)
    state._record(lam_t, score_gap_t)
    return state


def apply_restart(state, policy: RestartPolicy, t=None):
    """Apply ``policy`` after step ``t`` (1-indexed, default: the last step).

    Fixed times reset the process when ``t`` is one of ``t_i`` so that day
    ``t_i + 1`` starts at 1.  At-rejection policies record ``t`` as a hit
    time and reset when ``M_t >= threshold``.
    """
    t = state.t if t is None else t
    if policy.kind is RestartKind.AT_FIXED_TIMES:
        if t in policy.times:
            state.reset()
    elif policy.kind is RestartKind.AT_REJECTION:
        if state.wealth >= policy.threshold:
            hits = state.up.hit_times if isinstance(state, TwoSidedState) else state.hit_times
            hits.append(t)
            state.reset()
    return state


@dataclass(frozen=True)
class HitStatistics:
    """Supremum, first crossing and crossing count of a path.

    ``first_hit`` is 1-indexed (``None`` if never crossed).  The ``segment_*``
    fields repeat the statistics per restart segment.
    """

    sup: float
    first_hit: int | None
    hit_count: int
    segment_sups: tuple = ()
    segment_first_hits: tuple = ()
    segment_bounds: tuple = ()


def _crossings(wealth, seg, threshold):
    above = wealth >= threshold
    prev = np.concatenate([[False], above[:-1]])
    new_seg = np.concatenate([[True], seg[1:] != seg[:-1]])
    return above & (~prev | new_seg)


def hit_statistics(source, threshold) -> HitStatistics:
    """Summaries of a completed run.

    ``source`` is an :class:`EProcessRun`, an :class:`EProcessState`, a
    :class:`TwoSidedState` (mixture wealth) or a plain wealth array.  The
    supremum includes ``M_0 = 1``.
    """
    if isinstance(source, EProcessRun):
        wealth, seg = source.wealth, source.segment
    elif isinstance(source, TwoSidedState):
        a = np.asarray(source.up.log_path)
        b = np.asarray(source.down.log_path)
        wealth = 0.5 * (np.exp(a) + np.exp(b))
        seg = np.asarray(source.up.segment_ids, dtype=np.int64)
    elif isinstance(source, EProcessState):
        wealth = np.exp(np.asarray(source.log_path, dtype=float))
        seg = np.asarray(source.segment_ids, dtype=np.int64)
    else:
        wealth = np.asarray(source, dtype=float)
        seg = np.zeros(wealth.size, dtype=np.int64)
    if wealth.size == 0:
        return HitStatistics(1.0, None, 0, (1.0,), (None,), ((1, 0),))
    cross = _crossings(wealth, seg, threshold)
    idx = np.flatnonzero(cross)
    first = int(idx[0]) + 1 if idx.size else None
    sups, firsts, bounds = [], [], []
    for s in np.unique(seg):
        pos = np.flatnonzero(seg == s)
        w = wealth[pos]
        sups.append(float(max(1.0, w.max())))
        hit = np.flatnonzero(w >= threshold)
        firsts.append(int(pos[hit[0]]) + 1 if hit.size else None)
        bounds.append((int(pos[0]) + 1, int(pos[-1]) + 1))
    return HitStatistics(
        sup=float(max(1.0, wealth.max())),
        first_hit=first,
        hit_count=int(idx.size),
        segment_sups=tuple(sups),
        segment_first_hits=tuple(firsts),
        segment_bounds=tuple(bounds),
    )


@dataclass
class EProcessRun:
    """Columnar record of a run: one row per day.

    ``payoff`` is the step payoff ``g_t`` (identification value or signed
    score gap) and ``log_wealth`` the log of ``M_t``.  For two-sided runs
    ``payoff2``/``log_wealth2`` carry the second product and ``wealth`` is
    the mixture.
    """

    loss: np.ndarray
    r: np.ndarray
    z: np.ndarray | None
    lam: np.ndarray
    payoff: np.ndarray
    log_wealth: np.ndarray
    segment: np.ndarray
    r_star: np.ndarray | None = None
    z_star: np.ndarray | None = None
    payoff2: np.ndarray | None = None
    log_wealth2: np.ndarray | None = None

    @property
    def t(self):
        return np.arange(1, self.loss.size + 1)

    @property
    def wealth(self):
        w = np.exp(self.log_wealth)
        if self.log_wealth2 is not None:
            w = 0.5 * (w + np.exp(self.log_wealth2))
        return w

    def __len__(self):
        return int(self.loss.size)

    def final_wealth(self) -> float:
        return float(self.wealth[-1]) if len(self) else 1.0

    def replay(self):
        """Recompute the log-wealth path(s) from ``(lam, payoff, segment)``."""
        reset = _reset_from_segments(self.segment)
        a, _ = core.wealth_path(self.lam, self.payoff, reset, math.inf)
        if self.payoff2 is None:
            return a
        b, _ = core.wealth_path(self.lam, self.payoff2, reset, math.inf)
        return a, b


def _reset_from_segments(seg):
    seg = np.asarray(seg, dtype=np.int64)
    out = np.zeros(seg.size, dtype=np.uint8)
    if seg.size > 1:
        out[1:] = (seg[1:] != seg[:-1]).astype(np.uint8)
    return out


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=float)


def run_path(lam, payoff, policy: RestartPolicy):
    """Log-wealth path and segment ids for precomputed bets and payoffs."""
    lam, payoff = _as_f64(lam), _as_f64(payoff)
    try:
        return core.wealth_path(lam, payoff, policy.reset_mask(payoff.size), policy.crossing_threshold)
    except ArithmeticError as exc:
        t = int(exc.args[0]) + 1
        raise InvalidStep(f"negative e-factor at t={t}: lambda={lam[t - 1]:.6g}, "
                          f"payoff={payoff[t - 1]:.6g}") from None


def run_pair_path(lam1, g1, lam2, g2, policy: RestartPolicy, mix=False):
    """Two paths evolved with joint restarts (either crosses, or the mixture does)."""
    lam1, g1, lam2, g2 = map(_as_f64, (lam1, g1, lam2, g2))
    try:
        return core.wealth_pair_path(lam1, g1, lam2, g2, policy.reset_mask(g1.size),
                                     policy.crossing_threshold, int(mix))
    except ArithmeticError as exc:
        raise InvalidStep(f"negative e-factor at t={int(exc.args[0]) + 1}") from None

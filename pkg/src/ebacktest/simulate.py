"""
Data generators for the three experiment families.

* ``IidNormalWithNoisyForecasts``: N(0, 1) losses with VaR/ES forecasts
  ``1.64 + eps`` and ``2.06 + eps``, ``eps`` uniform on ``{+-i/10}``.
* ``StationarySkewedT``: AR(1)-GARCH(1,1) with skewed-t innovations.
* ``StructuralChangeVolatility`` / ``StructuralChangeTail``: the same model
  family with a GARCH or tail-shape coefficient that jumps after ``b_star``.

Every generator is a pure function of its arguments.  Randomness comes from a
Philox generator keyed by ``(seed, stream)``, one stream per purpose, so
replications can run in any order or in parallel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields

import numpy as np

from ebacktest.exceptions import ConfigError
from ebacktest.forecast.distributions import Normal, SkewedT

__all__ = [
    "ScenarioKind",
    "Scenario",
    "SimulatedPath",
    "IidPath",
    "GarchParams",
    "STATIONARY_PARAMS",
    "rng_stream",
    "gen_iid_scenario",
    "gen_stationary",
    "gen_garch_path",
    "gen_structural",
    "parse_config",
    "load_config",
]

# stream ids
STREAM_LOSS = 0
STREAM_NOISE = 1
STREAM_NOISE_ES = 2
STREAM_INNOVATION = 3

NOISE_SUPPORT = np.arange(-5, 6) / 10.0
VAR_BASE = 1.64
ES_BASE = 2.06
BURN_IN = 1000


def rng_stream(seed, stream):
    """Counter-based generator for one ``(seed, purpose)`` pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


class ScenarioKind(enum.Enum):
    IID = "IidNormalWithNoisyForecasts"
    STATIONARY = "StationarySkewedT"
    STRUCTURAL_VOL = "StructuralChangeVolatility"
    STRUCTURAL_TAIL = "StructuralChangeTail"

    @classmethod
    def parse(cls, name) -> "ScenarioKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            cls.IID: ("iid", "iidnormalwithnoisyforecasts", "table1"),
            cls.STATIONARY: ("stationary", "stationaryskewedt"),
            cls.STRUCTURAL_VOL: ("1", "structural1", "structuralchangevolatility", "volatility"),
            cls.STRUCTURAL_TAIL: ("2", "structural2", "structuralchangetail", "tail"),
        }
        for kind, names in aliases.items():
            if key in names:
                return kind
        raise ValueError(f"unknown scenario kind {name!r}")


@dataclass(frozen=True)
class GarchParams:
    phi0: float
    phi1: float
    alpha0: float
    alpha1: float
    beta1: float

    @property
    def unconditional_mean(self):
        return self.phi0 / (1.0 - self.phi1)

    @property
    def unconditional_variance(self):
        return self.alpha0 / (1.0 - self.alpha1 - self.beta1)


STATIONARY_PARAMS = GarchParams(-0.05, 0.3, 0.01, 0.1, 0.85)
STATIONARY_INNOVATION = (5.0, 1.5)  # (nu, gamma)
STRUCTURAL_VOL_PARAMS = GarchParams(-0.05, 0.1, 0.3, 0.01, 0.1)  # beta1 pre-break
STRUCTURAL_VOL_BETA_JUMP = 0.7
STRUCTURAL_TAIL_PARAMS = GarchParams(-0.05, 0.1, 0.3, 0.1, 0.5)
STRUCTURAL_TAIL_NU = (6.0, 3.0)


@dataclass
class SimulatedPath:
    """A loss path with the generator state needed by the ``opt`` forecaster.

    ``mu[t]`` and ``sigma[t]`` are the true conditional mean and volatility of
    ``losses[t]``; ``dists[t]`` its standardised innovation law.  Indices below
    ``split`` are presample, the rest evaluation.
    """

    losses: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    dists: list
    split: int
    b_star: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def tags(self):
        out = np.full(self.losses.size, "eval", dtype=object)
        out[: self.split] = "presample"
        return out

    @property
    def evaluation(self):
        return self.losses[self.split:]

    @property
    def break_index(self):
        """Absolute index of the first post-break day, if any."""
        return None if self.b_star is None else self.split + self.b_star


@dataclass
class IidPath:
    """iid scenario output; unpacks as ``(losses, var_forecasts, es_forecasts)``.

    All three arrays have length ``l + n``; the first ``split = l`` entries
    form the training sample.
    """

    losses: np.ndarray
    var: np.ndarray
    es: np.ndarray
    split: int
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.losses, self.var, self.es))

    @property
    def tags(self):
        out = np.full(self.losses.size, "eval", dtype=object)
        out[: self.split] = "presample"
        return out


def _check_pct(name, v):
    if not 0.0 <= v <= 0.5:
        raise ValueError(f"{name} must lie in [0, 0.5], got {v}")


def gen_iid_scenario(seed, l=10, n=1000, var_pct=0.0, es_pct=0.0, shared_noise=True) -> IidPath:
    """Standard normal losses with noisy, optionally understated VaR/ES forecasts.

    Parameters
    ----------
    seed : int
    l, n : int
        Training and evaluation sizes.
    var_pct, es_pct : float
        Underestimation: forecasts are scaled by ``1 - pct``.
    shared_noise : bool
        Use the same ``eps_t`` in both forecasts (default) or independent draws.
    """
    if l < 1 or n < 0:
        raise ValueError("need l >= 1 and n >= 0")
    _check_pct("var_pct", var_pct)
    _check_pct("es_pct", es_pct)
    size = l + n
    losses = rng_stream(seed, STREAM_LOSS).standard_normal(size)
    eps = rng_stream(seed, STREAM_NOISE).choice(NOISE_SUPPORT, size)
    eps_es = eps if shared_noise else rng_stream(seed, STREAM_NOISE_ES).choice(NOISE_SUPPORT, size)
    var = (VAR_BASE + eps) * (1.0 - var_pct)
    es = (ES_BASE + eps_es) * (1.0 - es_pct)
    meta = {"kind": ScenarioKind.IID.value, "seed": int(seed), "l": int(l), "n": int(n),
            "var_pct": float(var_pct), "es_pct": float(es_pct), "shared_noise": bool(shared_noise)}
    return IidPath(losses, var, es, int(l), meta)


def gen_garch_path(params, innovations, burn_in=BURN_IN, beta1=None):
    """Run the AR(1)-GARCH(1,1) recursion on given standardised innovations.

    ``beta1`` may be an array (time-varying coefficient, one per recorded
    step; the burn-in uses its first value).  Returns ``(losses, mu, sigma)``
    for the recorded steps only.
    """
    z = np.asarray(innovations, dtype=float)
    b = np.full(z.size, params.beta1) if beta1 is None else np.concatenate(
        [np.full(burn_in, np.asarray(beta1, dtype=float)[0]), np.asarray(beta1, dtype=float)])
    loss_prev = params.unconditional_mean
    s2 = params.alpha0 / max(1.0 - params.alpha1 - b[0], 1e-8)
    e2 = s2
    L = np.empty(z.size)
    MU = np.empty(z.size)
    S = np.empty(z.size)
    for t in range(z.size):
        mu = params.phi0 + params.phi1 * loss_prev
        s2 = params.alpha0 + params.alpha1 * e2 + b[t] * s2
        sd = math.sqrt(s2)
        eps = sd * z[t]
        L[t] = mu + eps
        MU[t], S[t] = mu, sd
        loss_prev, e2 = L[t], eps * eps
    return L[burn_in:], MU[burn_in:], S[burn_in:]


def gen_stationary(seed, presample=500, n=1000, params=STATIONARY_PARAMS,
                   innovation=None, burn_in=BURN_IN) -> SimulatedPath:
    """Stationary AR(1)-GARCH(1,1) path with skewed-t(5, 1.5) innovations."""
    if presample < 0 or n < 0:
        raise ValueError("sizes must be non-negative")
    dist = innovation if innovation is not None else SkewedT(*STATIONARY_INNOVATION)
    size = burn_in + presample + n
    z = dist.sample(rng_stream(seed, STREAM_INNOVATION), size)
    L, mu, sd = gen_garch_path(params, z, burn_in)
    meta = {"kind": ScenarioKind.STATIONARY.value, "seed": int(seed), "presample": int(presample),
            "n": int(n), "burn_in": int(burn_in), "params": params.__dict__,
            "innovation": {"family": dist.name, **dist.params()}}
    return SimulatedPath(L, mu, sd, [dist] * L.size, int(presample), None, meta)


def gen_structural(seed, scenario_kind=ScenarioKind.STRUCTURAL_VOL, b_star=2000, presample=500,
                   n=4000, burn_in=BURN_IN) -> SimulatedPath:
    """Path with a coefficient break after evaluation day ``b_star``.

    Scenario 1 (volatility): normal innovations, ``beta_t = 0.1 + 0.7 1{t > b*}``.
    Scenario 2 (tail): skewed t with ``gamma = 1`` and ``nu_t = 6 - 3 1{t > b*}``.
    ``t`` counts evaluation days from 1, so the first post-break loss sits at
    index ``presample + b_star``.
    """
    kind = ScenarioKind.parse(scenario_kind)
    if kind not in (ScenarioKind.STRUCTURAL_VOL, ScenarioKind.STRUCTURAL_TAIL):
        raise ValueError(f"{kind.value} is not a structural-change scenario")
    if not 0 < b_star <= n:
        raise ValueError(f"b_star must lie in (0, n], got {b_star}")
    size = burn_in + presample + n
    after = np.arange(presample + n) >= presample + b_star  # recorded steps past the break
    rng = rng_stream(seed, STREAM_INNOVATION)
    if kind is ScenarioKind.STRUCTURAL_VOL:
        params = STRUCTURAL_VOL_PARAMS
        beta = params.beta1 + STRUCTURAL_VOL_BETA_JUMP * after
        dist = Normal()
        z = dist.sample(rng, size)
        L, mu, sd = gen_garch_path(params, z, burn_in, beta1=beta)
        dists = [dist] * L.size
        extra = {"beta_pre": params.beta1, "beta_post": params.beta1 + STRUCTURAL_VOL_BETA_JUMP}
    else:
        params = STRUCTURAL_TAIL_PARAMS
        nu_pre, jump = STRUCTURAL_TAIL_NU
        pre, post = SkewedT(nu_pre, 1.0), SkewedT(nu_pre - jump, 1.0)
        # one stream, sampled in two blocks so the pre-break path does not
        # depend on the post-break law
        n_pre = burn_in + presample + b_star
        z = np.concatenate([pre.sample(rng, n_pre), post.sample(rng, size - n_pre)])
        L, mu, sd = gen_garch_path(params, z, burn_in)
        dists = [post if a else pre for a in after]
        extra = {"nu_pre": nu_pre, "nu_post": nu_pre - jump, "gamma": 1.0}
    meta = {"kind": kind.value, "seed": int(seed), "presample": int(presample), "n": int(n),
            "b_star": int(b_star), "burn_in": int(burn_in), "params": params.__dict__, **extra}
    return SimulatedPath(L, mu, sd, dists, int(presample), int(b_star), meta)


# ---------------------------------------------------------------------------
# key = value scenario files


@dataclass(frozen=True)
class Scenario:
    """Declarative scenario definition (see :func:`parse_config`)."""

    kind: ScenarioKind = ScenarioKind.IID
    seed: int = 0
    presample: int = 10
    n: int = 1000
    var_pct: float = 0.0
    es_pct: float = 0.0
    shared_noise: bool = True
    b_star: int = 2000
    burn_in: int = BURN_IN

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind.parse(self.kind))
        if self.presample < 0 or self.n < 0 or self.burn_in < 0:
            raise ValueError("sizes must be non-negative")
        _check_pct("var_pct", self.var_pct)
        _check_pct("es_pct", self.es_pct)

    def generate(self):
        if self.kind is ScenarioKind.IID:
            return gen_iid_scenario(self.seed, self.presample, self.n, self.var_pct, self.es_pct,
                                    self.shared_noise)
        if self.kind is ScenarioKind.STATIONARY:
            return gen_stationary(self.seed, self.presample, self.n, burn_in=self.burn_in)
        return gen_structural(self.seed, self.kind, self.b_star, self.presample, self.n, self.burn_in)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["kind"] = self.kind.value
        return d


_ALIASES = {"l": "presample", "warmup": "presample", "scenario": "kind"}


def _convert(key, raw, line):
    types = {f.name: f.type for f in fields(Scenario)}
    kind = types[key]
    try:
        if key == "kind":
            return ScenarioKind.parse(raw)
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError as err:
        raise ConfigError(f"invalid value {raw!r}", line=line, key=key) from err
    return raw


def parse_config(text) -> Scenario:
    """Parse ``key = value`` lines into a :class:`Scenario`.

    Blank lines and ``#`` comments are ignored.  Keys: ``kind``, ``seed``,
    ``presample`` (alias ``l``), ``n``, ``var_pct``, ``es_pct``,
    ``shared_noise``, ``b_star``, ``burn_in``.
    """
    known = {f.name for f in fields(Scenario)}
    values = {}
    for lineno, raw_line in enumerate(str(text).splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", line=lineno, key=key or None)
        key = _ALIASES.get(key, key)
        if key not in known:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in values:
            raise ConfigError("duplicate key", line=lineno, key=key)
        values[key] = _convert(key, value.strip(), lineno)
    if "kind" not in values:
        raise ConfigError("missing required key", key="kind")
    kind = values["kind"]
    if kind is not ScenarioKind.IID and "presample" not in values:
        values["presample"] = 500
    try:
        return Scenario(**values)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from err
    return parse_config(text)

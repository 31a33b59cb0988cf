"""
Vectorised kernel formulas keyed by integer code.

These are the reference implementations shared by :mod:`ebacktest.kernels`
and the pure-Python core.  The compiled core (``_core.pyx``) carries a C
transcription of the same expressions; ``tests/test_core.py`` checks that
the two agree.  No domain validation happens here.
"""

import numpy as np

# identification functions (standard backtests)
MEAN_RATIO = 0
MEAN_BOUNDED = 1
MEAN_BOUNDED_PRIME = 2
VAR = 3
VAR_PRIME = 4
ESVAR = 5
EXPECTILE_RATIO = 6
EXPECTILE_BOUNDED = 7
EXPECTILE_BOUNDED_PRIME = 8
MEANVAR = 9
EXPVARIANTILE = 10

# scoring functions (comparative backtests)
S_MEAN_H2 = 20
S_MEANVAR = 21
S_VAR_H1 = 22
S_VAR_H0 = 23
S_ESVAR_HHALF = 24
S_ESVAR_H0 = 25
S_EXPECTILE_H2 = 26
S_EXPECTILE_H0 = 27

IDENTIFICATION_CODES = frozenset(range(0, 11))
SCORE_CODES = frozenset(range(20, 28))


def identification(code, x, r, z, p, m):
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    if code == MEAN_RATIO:
        return x / r - 1.0
    if code == MEAN_BOUNDED:
        return (x - r) / (m + r)
    if code == MEAN_BOUNDED_PRIME:
        return (x - r) / (m - r)
    if code == VAR:
        return np.where(x > r, 1.0 / (1.0 - p), 0.0) - 1.0
    if code == VAR_PRIME:
        return 1.0 - np.where(x <= r, 1.0 / p, 0.0)
    if code == ESVAR:
        return np.maximum(x - z, 0.0) / ((1.0 - p) * (r - z)) - 1.0
    if code == EXPECTILE_RATIO:
        w = np.where(x > r, p, 1.0 - p)
        return w * (x / r - 1.0)
    if code == EXPECTILE_BOUNDED:
        w = np.where(x > r, p, 1.0 - p)
        return w * (x - r) / ((1.0 - p) * (m + r))
    if code == EXPECTILE_BOUNDED_PRIME:
        w = np.where(x > r, p, 1.0 - p)
        return w * (x - r) / (p * (m - r))
    if code == MEANVAR:
        return (x - z) ** 2 / r - 1.0
    if code == EXPVARIANTILE:
        d = x - z
        return np.where(d > 0, p, 1.0 - p) * d * d / r - 1.0
    raise ValueError(f"unknown identification code {code}")


def score(code, x, r, z, p):
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    if code == S_MEAN_H2:
        return (x - r) ** 2
    if code == S_MEANVAR:
        return z * (z - 2.0 * x) + r * (r - 2.0 * x * x)
    if code == S_VAR_H1:
        return (1.0 - p) * r + np.maximum(x - r, 0.0)
    if code == S_VAR_H0:
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(x > r, np.log(np.where(x > r, x, 1.0) / r), 0.0)
        return (1.0 - p) * np.log(r) + tail
    if code == S_ESVAR_HHALF:
        sr = 2.0 * np.sqrt(r)
        return np.maximum(x - z, 0.0) / sr + (1.0 - p) * (r + z) / sr
    if code == S_ESVAR_H0:
        return np.maximum(x - z, 0.0) / r + (1.0 - p) * (z / r - 1.0 + np.log(r))
    if code == S_EXPECTILE_H2:
        d = x - r
        return -np.where(d > 0, (1.0 - 2.0 * p) * d * d, 0.0) + (1.0 - p) * r * (r - 2.0 * x)
    if code == S_EXPECTILE_H0:
        u = x / r
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(x > r, np.log(np.where(x > r, u, 1.0)) + 1.0 - u, 0.0)
        return (1.0 - 2.0 * p) * tail + (1.0 - p) * (np.log(r) - 1.0 + u)
    raise ValueError(f"unknown score code {code}")


def payoff(code, x, r, z, rs, zs, p, m, sign=1.0):
    """Per-observation step payoff: signed identification value or score gap."""
    if code in IDENTIFICATION_CODES:
        return sign * identification(code, x, r, z, p, m)
    return sign * (score(code, x, r, z, p) - score(code, x, rs, zs, p))

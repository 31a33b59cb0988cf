#!/usr/bin/env python3
"""
Compiled core vs pure-Python fallback on the hot kernels.

    python3 benchmarks/bench_core.py [--repeat 5] [--quick]

Each kernel is timed on identical inputs with both implementations and the
outputs are compared, so a speed-up is only reported for matching results.
"""

import argparse
import math
import sys
import timeit

import numpy as np

from ebacktest import _core_python as pycore
from ebacktest import _formulas as fm

try:
    from ebacktest import _core as ccore
except ImportError:
    ccore = None


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    eps = rng.choice(np.arange(-5, 6) / 10.0, n)
    var = 1.64 + eps
    es = 2.06 + eps
    return x, es, var


def cases(quick):
    n_hist = 300 if quick else 1000
    n_path = 20_000 if quick else 200_000
    x, es, var = _inputs(n_hist)
    lo = np.zeros(n_hist, dtype=np.int64)
    hi = np.arange(n_hist, dtype=np.int64)
    dummy = np.zeros(n_hist)
    cap = np.full(n_hist, 0.5)
    xp = np.random.default_rng(1).standard_normal(n_path)
    g = np.clip(xp * 0.3, -0.99, 5.0)
    lam = np.full(n_path, 0.2)
    reset = np.zeros(n_path, dtype=np.uint8)
    reset[n_path // 2] = 1

    rng = np.random.default_rng(2)
    w = 0.1 * rng.standard_t(5, 500) / math.sqrt(5 / 3)
    s2 = float(np.var(w))
    theta = np.array([0.0, 0.1, math.log(0.05), 2.0, -2.0, math.log(3.0), 0.3])

    return [
        ("payoffs (EsVar, n=%d)" % n_path,
         lambda c: c.payoffs(fm.ESVAR, 0.95, 0.0, xp, np.full(n_path, 2.06), np.full(n_path, 1.64),
                             np.zeros(n_path), np.zeros(n_path), 1.0)),
        ("history_moments (plug-in, n=%d)" % n_hist,
         lambda c: c.history_moments(fm.ESVAR, 0.95, 0.0, x, lo, hi, es, var, dummy, dummy, 1.0)),
        ("history_grel (exact GREL, n=%d)" % (n_hist // 2),
         lambda c: c.history_grel(fm.ESVAR, 0.95, 0.0, x, lo[: n_hist // 2], hi[: n_hist // 2],
                                  es, var, dummy, dummy, 1.0, cap, 1e-6)),
        ("wealth_path (n=%d)" % n_path,
         lambda c: c.wealth_path(lam, g, reset, math.inf)),
        ("garch_filter (n=500)",
         lambda c: c.garch_filter(w, 0.0, 0.1, 0.05 * s2, 0.08, 0.87, s2)),
        ("garch_nll_theta (skewed t, n=500)",
         lambda c: c.garch_nll_theta(w, theta, s2, math.sqrt(s2), c.DIST_SKEWED_T)),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    if ccore is None:
        print("compiled core not built; only the fallback is timed", file=sys.stderr)

    print(f"{'kernel':<38} {'python [ms]':>12} {'cython [ms]':>12} {'speed-up':>9}")
    for name, fn in cases(args.quick):
        t_py = min(timeit.repeat(lambda: fn(pycore), number=1, repeat=args.repeat))
        if ccore is None:
            print(f"{name:<38} {1e3 * t_py:12.3f} {'-':>12} {'-':>9}")
            continue
        ok = _same(fn(pycore), fn(ccore))
        t_c = min(timeit.repeat(lambda: fn(ccore), number=1, repeat=args.repeat))
        tag = f"{t_py / t_c:8.1f}x" if ok else "MISMATCH"
        print(f"{name:<38} {1e3 * t_py:12.3f} {1e3 * t_c:12.3f} {tag:>9}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

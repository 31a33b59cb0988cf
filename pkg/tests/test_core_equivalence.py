"""The compiled core and the pure-Python fallback agree on every kernel."""

import math

import numpy as np
import pytest

from ebacktest import _core_python as pycore
from ebacktest import _formulas as fm

ccore = pytest.importorskip("ebacktest._core")

CODES = sorted(fm.IDENTIFICATION_CODES | fm.SCORE_CODES)
M = 3.0


def _inputs(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 2.9, n)
    z = rng.uniform(0.2, 0.9, n)
    r = z + rng.uniform(0.1, 1.5, n)
    zs = rng.uniform(0.2, 0.9, n)
    rs = zs + rng.uniform(0.1, 1.5, n)
    return x, r, z, rs, zs


def _both(fn_name, *args):
    out = []
    for core in (pycore, ccore):
        try:
            out.append(getattr(core, fn_name)(*args))
        except (ArithmeticError, ValueError) as err:
            out.append(type(err))
    return out


def _close(a, b, rtol=1e-12, atol=1e-12):
    if isinstance(a, type) or isinstance(b, type):
        assert a is b
        return
    if isinstance(a, tuple):
        for u, v in zip(a, b):
            _close(u, v, rtol, atol)
        return
    np.testing.assert_allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                               rtol=rtol, atol=atol)


def test_implementation_names():
    assert pycore.IMPLEMENTATION == "python"
    assert ccore.IMPLEMENTATION == "cython"


@pytest.mark.parametrize("code", CODES)
@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_payoffs(code, sign):
    x, r, z, rs, zs = _inputs()
    _close(*_both("payoffs", code, 0.9, M, x, r, z, rs, zs, sign))


@pytest.mark.parametrize("code", [fm.VAR, fm.ESVAR, fm.MEAN_BOUNDED, fm.S_VAR_H1, fm.S_ESVAR_HHALF,
                                  fm.S_MEAN_H2, fm.S_EXPECTILE_H2])
def test_history_moments_and_grel(code):
    x, r, z, rs, zs = _inputs(200, 1)
    n = x.size
    hi = np.arange(n, dtype=np.int64)
    lo = np.zeros(n, dtype=np.int64)
    lo[100:] = 100
    _close(*_both("history_moments", code, 0.9, M, x, lo, hi, r, z, rs, zs, 1.0), rtol=1e-10)
    cap = np.full(n, 0.5)
    _close(*_both("history_grel", code, 0.9, M, x, lo, hi, r, z, rs, zs, 1.0, cap, 1e-9), atol=1e-7)


def test_grel_argmax():
    g = np.array([19.0] * 10 + [-1.0] * 90)
    a, b = _both("grel_argmax", g, 1.0, 1e-10)
    assert a == pytest.approx(1 / 19, abs=1e-8) and b == pytest.approx(a, abs=1e-8)


@pytest.mark.parametrize("threshold", [math.inf, 3.0])
def test_wealth_path(threshold):
    rng = np.random.default_rng(2)
    lam = rng.uniform(0, 1, 1000)
    g = rng.uniform(-1, 2, 1000)
    reset = np.zeros(1000, dtype=np.uint8)
    reset[500] = 1
    a, b = _both("wealth_path", lam, g, reset, threshold)
    _close(a, b, rtol=0, atol=0)


def test_wealth_path_negative_factor():
    lam = np.array([0.5, 2.0])
    g = np.array([1.0, -1.0])
    a, b = _both("wealth_path", lam, g, np.zeros(2, dtype=np.uint8), math.inf)
    assert a is b and issubclass(a, ArithmeticError)


@pytest.mark.parametrize("mix", [0, 1])
def test_wealth_pair_path(mix):
    rng = np.random.default_rng(3)
    lam1, lam2 = rng.uniform(0, 1, (2, 800))
    g1, g2 = rng.uniform(-1, 1.5, (2, 800))
    reset = np.zeros(800, dtype=np.uint8)
    _close(*_both("wealth_pair_path", lam1, g1, lam2, g2, reset, 4.0, mix), rtol=0, atol=0)


def _garch_data():
    rng = np.random.default_rng(4)
    return 0.1 * rng.standard_t(5, 500) / math.sqrt(5 / 3)


def test_garch_filter():
    w = _garch_data()
    _close(*_both("garch_filter", w, 0.0, 0.1, 0.0005, 0.08, 0.87, float(np.var(w))))


@pytest.mark.parametrize("dist,nu,gam", [(0, 0.0, 1.0), (1, 6.0, 1.0), (2, 5.0, 1.4)])
def test_garch_nll(dist, nu, gam):
    w = _garch_data()
    _close(*_both("garch_nll", w, 0.0, 0.1, 0.0005, 0.08, 0.87, float(np.var(w)), dist, nu, gam),
           rtol=1e-11)


@pytest.mark.parametrize("dist,size", [(0, 5), (1, 6), (2, 7)])
def test_unpack_and_objective(dist, size):
    w = _garch_data()
    s2 = float(np.var(w))
    theta = np.array([0.0, 0.1, math.log(0.05), 2.0, -2.0, math.log(3.0), 0.3])[:size]
    _close(*_both("unpack_theta", theta, dist, math.sqrt(s2)))
    _close(*_both("garch_nll_theta", w, theta, s2, math.sqrt(s2), dist), rtol=1e-11)

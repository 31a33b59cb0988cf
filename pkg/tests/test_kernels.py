import math
import zlib

import numpy as np
import pytest

import oracles as o
from ebacktest.exceptions import DomainError
from ebacktest.kernels import (
    Homogeneity,
    IdentificationKernel,
    Kind,
    RiskFunctional,
    ScoringKernel,
    Variant,
    bayes_estat,
    eval_identification,
    eval_score,
    h_bound,
    score_gap_infimum,
)


def ident(kind, p=None, M=None, variant=Variant.RATIO, prime=False):
    return IdentificationKernel(RiskFunctional(kind, p, M), variant, prime)


def scorer(kind, p=None, M=10.0, hom=None):
    return ScoringKernel(RiskFunctional(kind, p, M), hom)


# ---------------------------------------------------------------------------
# worked examples


class TestIdentificationExamples:
    def test_mean_ratio(self):
        assert eval_identification(ident(Kind.MEAN), 2.0, 4.0)[0] == pytest.approx(-0.5)

    def test_var_breach(self):
        assert eval_identification(ident(Kind.VAR, 0.95), 3.0, 2.0)[0] == pytest.approx(19.0)

    def test_var_no_breach(self):
        assert eval_identification(ident(Kind.VAR, 0.95), 1.0, 2.0)[0] == pytest.approx(-1.0)

    def test_esvar(self):
        v = eval_identification(ident(Kind.ES_VAR, 0.875), 1.0, 1.0, z=0.0)
        assert v[0] == pytest.approx(7.0)

    def test_expectile_ratio(self):
        assert eval_identification(ident(Kind.EXPECTILE, 0.9), 2.0, 1.0)[0] == pytest.approx(0.9)

    def test_vectorised(self):
        v = eval_identification(ident(Kind.VAR, 0.9), np.array([0.0, 5.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(v, [-1.0, 9.0])


class TestIdentificationErrors:
    def test_esvar_needs_r_above_z(self):
        with pytest.raises(DomainError):
            eval_identification(ident(Kind.ES_VAR, 0.9), 1.0, 1.0, z=1.0)

    def test_ratio_needs_positive_r(self):
        with pytest.raises(DomainError):
            eval_identification(ident(Kind.MEAN), 1.0, 0.0)

    def test_bounded_support(self):
        k = ident(Kind.MEAN, M=2.0, variant=Variant.BOUNDED)
        with pytest.raises(DomainError):
            eval_identification(k, 3.0, 0.5)

    def test_row_reported(self):
        with pytest.raises(DomainError) as exc:
            eval_identification(ident(Kind.ES_VAR, 0.9), np.ones(3), np.array([2.0, 2.0, 0.5]),
                                z=np.ones(3))
        assert exc.value.row == 3

    def test_missing_statistic(self):
        with pytest.raises(DomainError):
            eval_identification(ident(Kind.ES_VAR, 0.9), 1.0, 2.0)

    def test_expectile_level(self):
        with pytest.raises(DomainError):
            RiskFunctional(Kind.EXPECTILE, 0.3)

    def test_no_bounded_var(self):
        with pytest.raises(DomainError):
            ident(Kind.VAR, 0.9, 5.0, Variant.BOUNDED)


def test_dimension():
    assert RiskFunctional(Kind.ES_VAR, 0.9).dimension == 2
    assert RiskFunctional(Kind.MEAN_VARIANCE).dimension == 2
    assert RiskFunctional(Kind.EXPECTILE_VARIANTILE, 0.9).dimension == 2
    assert RiskFunctional(Kind.VAR, 0.9).dimension == 1


class TestScoreExamples:
    def test_mean(self):
        assert eval_score(scorer(Kind.MEAN), 1.0, 0.0)[0] == pytest.approx(1.0)

    def test_var(self):
        assert eval_score(scorer(Kind.VAR, 0.99, 5.0), 0.0, 2.0)[0] == pytest.approx(0.02)

    def test_meanvariance(self):
        assert eval_score(scorer(Kind.MEAN_VARIANCE), 1.0, 1.0, 1.0)[0] == pytest.approx(-2.0)

    def test_support_violation(self):
        with pytest.raises(DomainError):
            eval_score(scorer(Kind.MEAN, M=1.0), 2.0, 0.0)

    def test_esvar_positive_var(self):
        with pytest.raises(DomainError):
            eval_score(scorer(Kind.ES_VAR, 0.9), 1.0, 2.0, -0.5)

    def test_esvar_order(self):
        with pytest.raises(DomainError):
            eval_score(scorer(Kind.ES_VAR, 0.9), 1.0, 1.0, 1.5)

    def test_h0_positive(self):
        with pytest.raises(DomainError):
            eval_score(scorer(Kind.VAR, 0.9, hom=Homogeneity.H0), 1.0, -1.0)

    def test_needs_bound(self):
        with pytest.raises(DomainError):
            ScoringKernel(RiskFunctional(Kind.MEAN))


class TestGapInfimum:
    def test_var_example(self):
        k = scorer(Kind.VAR, 0.99, 5.0)
        assert score_gap_infimum(k, 2.0, None, 1.0)[0] == pytest.approx(o.VAR_GAP_INF, abs=1e-12)

    def test_expectile_example(self):
        k = scorer(Kind.EXPECTILE, 0.9, 2.0)
        assert score_gap_infimum(k, 0.5, None, 1.0)[0] == pytest.approx(o.EXPECTILE_GAP_INF, abs=1e-9)

    def test_identical(self):
        k = scorer(Kind.MEAN, M=3.0)
        assert score_gap_infimum(k, 0.7, None, 0.7)[0] == pytest.approx(0.0, abs=1e-12)

    def test_h_bound_values(self):
        k = scorer(Kind.VAR, 0.99, 5.0)
        assert h_bound(k, 2.0, None, 1.0)[0] == pytest.approx(o.VAR_H_BOUND)
        assert math.isinf(h_bound(k, 1.0, None, 1.0)[0])


# oracle equivalence on random forecast pairs (reduced count; the acceptance
# suite runs 1000 pairs per kernel)

def _gap_case(code_name, rng, M):
    p = float(rng.uniform(0.55, 0.99))
    if code_name == "mean":
        r, rs = rng.uniform(-M, M, 2)
        return (scorer(Kind.MEAN, M=M), (r, None, rs, None),
                lambda x: o.score_mean(x, r) - o.score_mean(x, rs), (r, rs))
    if code_name == "var":
        r, rs = rng.uniform(-M, M, 2)
        return (scorer(Kind.VAR, p, M), (r, None, rs, None),
                lambda x: o.score_var(x, r, p) - o.score_var(x, rs, p), (r, rs))
    if code_name == "var_h0":
        r, rs = rng.uniform(0.05, M, 2)
        return (scorer(Kind.VAR, p, M, Homogeneity.H0), (r, None, rs, None),
                lambda x: o.score_var_log(x, r, p) - o.score_var_log(x, rs, p), (r, rs))
    if code_name == "esvar":
        z, zs = rng.uniform(0.05, M / 2, 2)
        r, rs = z + rng.uniform(0.0, M / 2), zs + rng.uniform(0.0, M / 2)
        return (scorer(Kind.ES_VAR, p, M), (r, z, rs, zs),
                lambda x: o.score_esvar_sqrt(x, r, z, p) - o.score_esvar_sqrt(x, rs, zs, p), (z, zs))
    if code_name == "esvar_h0":
        z, zs = rng.uniform(-M / 2, M / 2, 2)
        r = max(z, 0.0) + rng.uniform(0.05, M / 2)
        rs = max(zs, 0.0) + rng.uniform(0.05, M / 2)
        return (scorer(Kind.ES_VAR, p, M, Homogeneity.H0), (r, z, rs, zs),
                lambda x: o.score_esvar_log(x, r, z, p) - o.score_esvar_log(x, rs, zs, p), (z, zs))
    if code_name == "expectile":
        r, rs = rng.uniform(-M, M, 2)
        return (scorer(Kind.EXPECTILE, p, M), (r, None, rs, None),
                lambda x: o.score_expectile(x, r, p) - o.score_expectile(x, rs, p), (r, rs))
    if code_name == "expectile_h0":
        r, rs = rng.uniform(0.05, M, 2)
        return (scorer(Kind.EXPECTILE, p, M, Homogeneity.H0), (r, None, rs, None),
                lambda x: o.score_expectile_log(x, r, p) - o.score_expectile_log(x, rs, p), (r, rs))
    b, bs = rng.uniform(-M, M, 2)
    a, as_ = rng.uniform(0.0, M, 2)
    return (scorer(Kind.MEAN_VARIANCE, M=M), (a, b, as_, bs),
            lambda x: o.score_meanvar(x, a, b) - o.score_meanvar(x, as_, bs),
            ((b - bs) / 2 / max(abs(a - as_), 1e-12), 0.0))


KERNELS = ["mean", "var", "var_h0", "esvar", "esvar_h0", "expectile", "expectile_h0", "meanvar"]


@pytest.mark.parametrize("name", KERNELS)
def test_gap_infimum_matches_grid(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    M = 4.0
    # the 0-homogeneous VaR infimum is taken over [0, M]
    lo_x = 0.0 if name == "var_h0" else -M
    for _ in range(100):
        k, (r, z, rs, zs), fn, kinks = _gap_case(name, rng, M)
        closed = score_gap_infimum(k, r, z, rs, zs)[0]
        grid = o.grid_infimum(fn, lo_x, M, kinks, points=20_001)
        slack = 1e-6 + 50 * (2 * M / 20_000) ** 2 + 1e-3 * (2 * M / 20_000) * 40
        assert closed <= grid + 1e-9
        assert closed >= grid - max(slack, 1e-3)


@pytest.mark.parametrize("name", KERNELS)
def test_lower_bound_with_h(name):
    rng = np.random.default_rng(7)
    M = 3.0
    lo_x = 0.0 if name == "var_h0" else -M
    xs = np.linspace(lo_x, M, 2001)
    for _ in range(30):
        k, (r, z, rs, zs), fn, _ = _gap_case(name, rng, M)
        h = h_bound(k, r, z, rs, zs)[0]
        if math.isfinite(h):
            assert np.all(1.0 + h * fn(xs) >= -1e-9)


# ---------------------------------------------------------------------------
# properties on discrete distributions


def _exact_quantile_case(rng, p):
    """Atoms whose cdf hits p exactly, so VaR is an interval."""
    k = int(rng.integers(2, 7))
    atoms = np.sort(rng.uniform(0.1, 5.0, k))
    j = int(rng.integers(1, k))
    w_lo = rng.dirichlet(np.ones(j)) * p
    w_hi = rng.dirichlet(np.ones(k - j)) * (1 - p)
    return atoms, np.concatenate([w_lo, w_hi]), atoms[j - 1], atoms[j]


def test_identification_zero_mean():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p = float(rng.uniform(0.6, 0.98))
        atoms, probs = o.random_atoms(rng)
        if np.ptp(atoms) < 1e-3:
            continue
        mean = o.dist_mean(atoms, probs)
        assert np.dot(eval_identification(ident(Kind.MEAN), atoms, mean), probs) == pytest.approx(0, abs=1e-9)

        e = o.dist_expectile(atoms, probs, p)
        v = eval_identification(ident(Kind.EXPECTILE, p), atoms, e)
        assert np.dot(v, probs) == pytest.approx(0, abs=1e-9)

        var_lo, _ = o.dist_quantile_interval(atoms, probs, p)
        es = o.dist_es(atoms, probs, p)
        if es > var_lo + 1e-9:
            v = eval_identification(ident(Kind.ES_VAR, p), atoms, es, z=var_lo)
            assert np.dot(v, probs) == pytest.approx(0, abs=1e-9)

        m, s2 = o.dist_mean(atoms, probs), o.dist_var(atoms, probs)
        if s2 > 1e-6:
            v = eval_identification(ident(Kind.MEAN_VARIANCE), atoms, s2, z=m)
            assert np.dot(v, probs) == pytest.approx(0, abs=1e-9)
            vt = o.dist_variantile(atoms, probs, p)
            v = eval_identification(ident(Kind.EXPECTILE_VARIANTILE, p), atoms, vt, z=e)
            assert np.dot(v, probs) == pytest.approx(0, abs=1e-9)

        # exact-hit cdf for VaR
        atoms, probs, lo, hi = _exact_quantile_case(rng, p)
        for a in (lo, 0.5 * (lo + hi)):
            v = eval_identification(ident(Kind.VAR, p), atoms, a)
            assert np.dot(v, probs) == pytest.approx(0, abs=1e-9)


def test_identification_sign():
    rng = np.random.default_rng(12)
    for _ in range(200):
        p = float(rng.uniform(0.6, 0.98))
        atoms, probs = o.random_atoms(rng)
        if np.ptp(atoms) < 1e-2:
            continue
        mean = o.dist_mean(atoms, probs)
        k = ident(Kind.MEAN)
        assert np.dot(eval_identification(k, atoms, 1.1 * mean), probs) < 0
        assert np.dot(eval_identification(k, atoms, 0.9 * mean), probs) > 0
        e = o.dist_expectile(atoms, probs, p)
        k = ident(Kind.EXPECTILE, p)
        assert np.dot(eval_identification(k, atoms, e + 0.05), probs) < 0
        assert np.dot(eval_identification(k, atoms, e - 0.05), probs) > 0
        lo, hi = o.dist_quantile_interval(atoms, probs, p)
        k = ident(Kind.VAR, p)
        assert np.dot(eval_identification(k, atoms, hi + 1e-6), probs) < 0
        assert np.dot(eval_identification(k, atoms, lo - 1e-6), probs) > 0


def _argmin(fn, grid):
    return grid[int(np.argmin([fn(a) for a in grid]))]


def test_score_minimisation():
    rng = np.random.default_rng(13)
    M = 6.0
    grid = np.linspace(0.02, 5.5, 2001)
    step = grid[1] - grid[0]
    for _ in range(40):
        p = float(rng.uniform(0.6, 0.95))
        atoms, probs = o.random_atoms(rng)
        if np.ptp(atoms) < 0.05:
            continue

        def expected(kernel, a, z=None):
            return float(np.dot(eval_score(kernel, atoms, a, z), probs))

        for hom in (Homogeneity.H2,):
            k = scorer(Kind.MEAN, M=M, hom=hom)
            assert abs(_argmin(lambda a: expected(k, a), grid) - o.dist_mean(atoms, probs)) <= step
        lo, hi = o.dist_quantile_interval(atoms, probs, p)
        for hom in (Homogeneity.H1, Homogeneity.H0):
            k = scorer(Kind.VAR, p, M, hom)
            a = _argmin(lambda a: expected(k, a), grid)
            assert lo - step <= a <= hi + step
        e = o.dist_expectile(atoms, probs, p)
        for hom in (Homogeneity.H2, Homogeneity.H0):
            k = scorer(Kind.EXPECTILE, p, M, hom)
            assert abs(_argmin(lambda a: expected(k, a), grid) - e) <= step
        es = o.dist_es(atoms, probs, p)
        for hom in (Homogeneity.HHALF, Homogeneity.H0):
            k = scorer(Kind.ES_VAR, p, M, hom)
            r_grid = grid[grid >= lo]
            a = _argmin(lambda a: expected(k, a, lo), r_grid)
            assert abs(a - es) <= step
            z_grid = grid[grid <= es]
            z = _argmin(lambda z: expected(k, es, z), z_grid)
            assert lo - step <= z <= hi + step
        # b(b - 2x) + a(a - 2x^2) separates: the mean coordinate is minimised
        # at E X and the first coordinate at the second moment E X^2
        m, m2 = o.dist_mean(atoms, probs), o.dist_mean(atoms ** 2, probs)
        k = scorer(Kind.MEAN_VARIANCE, M=M)
        a_grid = np.linspace(0.0, M * M, 20001)
        a_step = a_grid[1] - a_grid[0]
        assert abs(_argmin(lambda a: expected(k, a, m), a_grid) - m2) <= a_step
        assert abs(_argmin(lambda b: expected(k, m2, b), grid) - m) <= step


@pytest.mark.parametrize("kind,hom,m", [
    (Kind.MEAN, Homogeneity.H2, 2.0),
    (Kind.VAR, Homogeneity.H1, 1.0),
    (Kind.ES_VAR, Homogeneity.HHALF, 0.5),
    (Kind.EXPECTILE, Homogeneity.H2, 2.0),
])
def test_homogeneity(kind, hom, m):
    rng = np.random.default_rng(5)
    k_big = scorer(kind, 0.9, 1e6, hom)
    for _ in range(200):
        theta = float(rng.uniform(0.01, 10.0))
        x = float(rng.uniform(-3, 3))
        z = float(rng.uniform(0.1, 2.0))
        r = z + float(rng.uniform(0.0, 2.0))
        zz = z if kind is Kind.ES_VAR else None
        lhs = eval_score(k_big, theta * x, theta * r, None if zz is None else theta * zz)[0]
        rhs = theta ** m * eval_score(k_big, x, r, zz)[0]
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))


@pytest.mark.parametrize("kind", [Kind.VAR, Kind.ES_VAR, Kind.EXPECTILE])
def test_zero_homogeneous_gaps(kind):
    rng = np.random.default_rng(6)
    k = scorer(kind, 0.9, 1e6, Homogeneity.H0)
    for _ in range(200):
        theta = float(rng.uniform(0.01, 10.0))
        x = float(rng.uniform(0.0, 3))
        z, zs = rng.uniform(0.1, 2.0, 2)
        r, rs = z + rng.uniform(0.01, 2.0), zs + rng.uniform(0.01, 2.0)
        two = kind is Kind.ES_VAR
        g1 = eval_score(k, x, r, z if two else None)[0] - eval_score(k, x, rs, zs if two else None)[0]
        g2 = (eval_score(k, theta * x, theta * r, theta * z if two else None)[0]
              - eval_score(k, theta * x, theta * rs, theta * zs if two else None)[0])
        assert g1 == pytest.approx(g2, abs=1e-9)


class TestBayes:
    def test_esvar_reduces_to_identification(self):
        p, x, r, z = 0.9, np.array([0.0, 1.0, 3.0]), 2.0, 1.0
        f = RiskFunctional(Kind.ES_VAR, p)
        e = bayes_estat(f, x, r, z, 1.0 / (r - z))
        v = eval_identification(ident(Kind.ES_VAR, p), x, r, z=z)
        np.testing.assert_allclose(e, 1.0 + v)
        np.testing.assert_allclose(e, np.maximum(x - z, 0) / ((1 - p) * (r - z)))

    def test_meanvariance(self):
        f = RiskFunctional(Kind.MEAN_VARIANCE)
        assert bayes_estat(f, 3.0, 2.0, 1.0, 0.5)[0] == pytest.approx(2.0)

    def test_exact_forecast_gives_one(self):
        f = RiskFunctional(Kind.MEAN_VARIANCE)
        assert bayes_estat(f, 3.0, 4.0, 1.0, 0.2)[0] == pytest.approx(1.0)

    def test_lower_bound_violation(self):
        f = RiskFunctional(Kind.MEAN_VARIANCE, M=10.0)
        with pytest.raises(DomainError):
            bayes_estat(f, 1.0, 2.0, 0.0, 1.0)

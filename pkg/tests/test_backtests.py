import numpy as np
import pytest

from ebacktest.backtests import (
    BacktestInput,
    Dominance,
    Zone,
    classify_zone,
    heatmap,
    run_comparative,
    run_standard,
    support_bound_from_warmup,
)
from ebacktest.betting import BettingConfig
from ebacktest.eprocess import RestartPolicy
from ebacktest.exceptions import AlignmentError, DomainError
from ebacktest.kernels import Kind, RiskFunctional
from ebacktest.simulate import gen_iid_scenario


class TestClassifyZone:
    def test_red(self):
        assert classify_zone(30, 1.5, alpha=0.1).zone is Zone.RED

    def test_green(self):
        assert classify_zone(1.5, 30, alpha=0.1).zone is Zone.GREEN

    def test_yellow_both(self):
        v = classify_zone(12, 40, alpha=0.1)
        assert v.zone is Zone.YELLOW
        assert v.dominance_magnitude is Dominance.INTERNAL

    def test_orange(self):
        v = classify_zone(40, 12, alpha=0.1)
        assert v.zone is Zone.ORANGE
        assert v.dominance_magnitude is Dominance.STANDARD

    def test_neither(self):
        assert classify_zone(2, 3, alpha=0.1).zone is Zone.YELLOW

    def test_speed(self):
        v = classify_zone(40, 12, 10, 30, alpha=0.1)
        assert v.dominance_speed is Dominance.STANDARD
        assert classify_zone(40, 12, None, 10, alpha=0.1).dominance_speed is Dominance.INTERNAL
        assert classify_zone(40, 12, 5, None, alpha=0.1).dominance_speed is Dominance.STANDARD

    def test_closed_threshold(self):
        assert classify_zone(10.0, 1.0, alpha=0.1).zone is Zone.RED

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            classify_zone(1, 1, alpha=1.0)

    def test_serialisation(self):
        d = classify_zone(40, 12, alpha=0.1).to_dict()
        assert d["zone"] == "Orange" and d["dominance_magnitude"] == "StandardWeaklyDominates"


ESVAR = RiskFunctional(Kind.ES_VAR, 0.95)


def _iid(es_pct=0.0, seed=0, n=1000):
    path = gen_iid_scenario(seed, 10, n, es_pct=es_pct)
    x, var, es = path
    return x, var, es


class TestStandard:
    def test_empty(self):
        inp = BacktestInput(np.zeros(0), np.zeros(0), ESVAR, z=np.zeros(0))
        res = run_standard(inp)
        assert not res.rejected and len(res.run) == 0 and res.first_hit is None

    def test_underestimation_rejected(self):
        x, var, es = _iid(0.10, seed=1)
        inp = BacktestInput(x[10:], es[10:], ESVAR, z=var[10:], betting=BettingConfig(c=1.0),
                            prefix=x[:10])
        res = run_standard(inp)
        assert res.rejected and res.first_hit is not None
        assert res.stats.sup >= 10

    def test_by_threshold(self):
        x, var, es = _iid(0.10, seed=1)
        inp = BacktestInput(x, es, ESVAR, z=var, thresholds=(2.0, 1e9))
        out = run_standard(inp).by_threshold()
        assert out[0]["rejected"] and not out[1]["rejected"]

    def test_alignment(self):
        with pytest.raises(AlignmentError):
            BacktestInput(np.zeros(5), np.ones(4), RiskFunctional(Kind.VAR, 0.9))

    def test_domain_error_row(self):
        f = RiskFunctional(Kind.ES_VAR, 0.9)
        with pytest.raises(DomainError) as exc:
            run_standard(BacktestInput(np.zeros(3), np.array([2.0, 2.0, 0.5]), f, z=np.ones(3)))
        assert exc.value.row == 3

    def test_two_sided_mean(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0.0, 2.0, 400) + 0.5
        f = RiskFunctional(Kind.MEAN, M=3.0)
        from ebacktest.kernels import Variant
        inp = BacktestInput(x, np.full(400, 1.5), f, variant=Variant.BOUNDED, two_sided=True,
                            betting=BettingConfig(c=1.0))
        res = run_standard(inp)
        assert res.run.log_wealth2 is not None
        assert np.all(res.run.wealth >= 0)

    def test_two_sided_needs_one_dim(self):
        x, var, es = _iid()
        with pytest.raises(DomainError):
            run_standard(BacktestInput(x, es, ESVAR, z=var, two_sided=True))

    def test_to_dict(self):
        x, var, es = _iid()
        d = run_standard(BacktestInput(x, es, ESVAR, z=var)).to_dict()
        assert {"rejected", "sup", "first_hit", "thresholds", "segments"} <= set(d)


def _comparative(r, rs, x, **kw):
    f = RiskFunctional(Kind.VAR, 0.9, float(1.1 * np.max(np.abs(x))))
    return run_comparative(BacktestInput(x, r, f, r_star=rs, **kw))


class TestComparative:
    def test_identical_yellow(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(300)
        r = np.full(300, 1.28)
        res = _comparative(r, r, x)
        assert res.verdict.zone is Zone.YELLOW
        np.testing.assert_array_equal(res.run_minus.wealth, 1.0)
        np.testing.assert_array_equal(res.run_plus.wealth, 1.0)

    def test_one_day_gap(self):
        from ebacktest.eprocess import EProcessState, step_comparative
        s = step_comparative(EProcessState(), 0.99, 1.0)
        s2 = step_comparative(EProcessState(), -0.99, 1.0)
        assert s.wealth == pytest.approx(1.99) and s2.wealth == pytest.approx(0.01)
        v = classify_zone(s.wealth, max(1.0, s2.wealth), alpha=0.5)
        assert v.zone is Zone.YELLOW

    def test_worse_internal_is_red(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(2000)
        good = np.full(2000, 1.2816)
        bad = np.full(2000, 0.2)
        res = _comparative(bad, good, x, alpha=0.5)
        assert res.verdict.zone is Zone.RED
        res2 = _comparative(good, bad, x, alpha=0.5)
        assert res2.verdict.zone is Zone.GREEN

    def test_swap_antisymmetry(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(500)
        a = np.full(500, 1.0)
        b = np.full(500, 1.6)
        r1, r2 = _comparative(a, b, x), _comparative(b, a, x)
        np.testing.assert_allclose(r1.run_minus.payoff, -r2.run_minus.payoff, atol=1e-12)
        np.testing.assert_allclose(r1.run_minus.log_wealth, r2.run_plus.log_wealth, atol=1e-12)

    def test_empty(self):
        f = RiskFunctional(Kind.VAR, 0.9, 5.0)
        res = run_comparative(BacktestInput(np.zeros(0), np.zeros(0), f, r_star=np.zeros(0)))
        assert res.verdict.zone is Zone.YELLOW

    def test_needs_standard(self):
        f = RiskFunctional(Kind.VAR, 0.9, 5.0)
        with pytest.raises(AlignmentError):
            run_comparative(BacktestInput(np.zeros(3), np.ones(3), f))

    def test_needs_bound(self):
        with pytest.raises(DomainError):
            run_comparative(BacktestInput(np.zeros(3), np.ones(3), RiskFunctional(Kind.VAR, 0.9),
                                          r_star=np.ones(3)))

    def test_loss_outside_support(self):
        f = RiskFunctional(Kind.VAR, 0.9, 1.0)
        with pytest.raises(DomainError):
            run_comparative(BacktestInput(np.array([0.0, 2.0]), np.ones(2), f, r_star=np.ones(2)))

    def test_segments(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(400)
        res = _comparative(np.full(400, 1.0), np.full(400, 1.3), x,
                           restart=RestartPolicy.at_fixed_times([200]))
        assert len(res.segment_verdicts) == 2
        assert res.verdict == res.segment_verdicts[-1]
        d = res.to_dict()
        assert [s["start"] for s in d["segments"]] == [1, 201]

    def test_bets_within_cap(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(500)
        res = _comparative(rng.uniform(0.5, 2, 500), rng.uniform(0.5, 2, 500), x,
                           betting=BettingConfig(method="exact", c=0.5))
        f = 1 + res.run_minus.lam * res.run_minus.payoff
        assert np.all(f >= 0.0)


def test_heatmap_two_models():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(300)
    roster = {"a": np.full(300, 1.28), "b": np.full(300, 0.5)}
    f = RiskFunctional(Kind.VAR, 0.9, float(1.1 * np.abs(x).max()))
    hm = heatmap(x, roster, f, alpha=0.5)
    z = hm.zones()
    assert len(z) == 2 and z[0][0] == "Yellow" and z[1][1] == "Yellow"
    d = hm.to_dict()
    assert d["axes"] == {"horizontal": "internal", "vertical": "standard"}
    assert len(d["cells"]) == 4
    # row = standard, column = internal
    assert d["cells"][1]["standard"] == "a" and d["cells"][1]["internal"] == "b"


def test_heatmap_threads_match_serial():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(200)
    roster = {"a": np.full(200, 1.28), "b": np.full(200, 0.8), "c": np.full(200, 2.0)}
    f = RiskFunctional(Kind.VAR, 0.9, float(1.1 * np.abs(x).max()))
    assert heatmap(x, roster, f).zones() == heatmap(x, roster, f, workers=3).zones()


def test_support_bound_from_warmup():
    assert support_bound_from_warmup(np.array([1.0, -2.0, 10.0]), 2) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        support_bound_from_warmup(np.zeros(3), 2)

import numpy as np
import pytest
from scipy import stats

from ebacktest.exceptions import ConfigError
from ebacktest.forecast import SkewedT
from ebacktest.simulate import (
    NOISE_SUPPORT,
    STATIONARY_PARAMS,
    GarchParams,
    IidPath,
    ScenarioKind,
    gen_garch_path,
    gen_iid_scenario,
    gen_stationary,
    gen_structural,
    parse_config,
    rng_stream,
)


class TestIid:
    def test_support(self):
        x, var, es = gen_iid_scenario(0, 10, 500)
        np.testing.assert_allclose(np.unique(np.round(var, 10)), np.round(1.64 + NOISE_SUPPORT, 10))
        assert set(np.round(es, 10)) <= set(np.round(2.06 + NOISE_SUPPORT, 10))
        assert x.size == 510

    def test_shared_noise(self):
        x, var, es = gen_iid_scenario(1, 10, 100)
        np.testing.assert_allclose(es - var, 0.42)

    def test_independent_noise(self):
        _, var, es = gen_iid_scenario(1, 10, 100, shared_noise=False)
        assert np.ptp(es - var) > 0

    def test_underestimation(self):
        _, _, es0 = gen_iid_scenario(2, 10, 50)
        _, _, es1 = gen_iid_scenario(2, 10, 50, es_pct=0.10)
        np.testing.assert_allclose(es1, 0.9 * es0)

    def test_empty_evaluation(self):
        p = gen_iid_scenario(0, 10, 0)
        assert isinstance(p, IidPath) and p.losses.size == 10
        assert list(p.tags) == ["presample"] * 10

    def test_deterministic(self):
        a, b = gen_iid_scenario(5), gen_iid_scenario(5)
        assert a.losses.tobytes() == b.losses.tobytes()

    def test_bad_pct(self):
        with pytest.raises(ValueError):
            gen_iid_scenario(0, es_pct=0.6)


class TestStationary:
    def test_deterministic(self):
        a, b = gen_stationary(3, 500, 200), gen_stationary(3, 500, 200)
        assert a.losses.tobytes() == b.losses.tobytes()
        assert a.losses.size == 700 and a.split == 500

    def test_long_run_variance(self):
        p = gen_stationary(0, 0, 100_000)
        # variance of an AR(1) with GARCH errors: sigma_eps^2 / (1 - phi1^2)
        target = STATIONARY_PARAMS.unconditional_variance / (1 - STATIONARY_PARAMS.phi1 ** 2)
        assert abs(p.losses.var() / target - 1) < 0.10

    def test_true_state(self):
        p = gen_stationary(1, 10, 50)
        z = (p.losses - p.mu) / p.sigma
        assert np.all(np.isfinite(z))
        np.testing.assert_allclose(p.mu[1:], -0.05 + 0.3 * p.losses[:-1])

    def test_degenerate_recursion_is_iid(self):
        params = GarchParams(0.2, 0.0, 2.0, 0.0, 0.0)
        dist = SkewedT(5.0, 1.5)
        z = dist.sample(rng_stream(0, 0), 1100)
        L, mu, sd = gen_garch_path(params, z, 100)
        np.testing.assert_allclose(L, 0.2 + np.sqrt(2.0) * z[100:])


class TestStructural:
    def test_volatility_ratio(self):
        ratios = []
        for s in range(20):
            p = gen_structural(s, ScenarioKind.STRUCTURAL_VOL, 2000, 500, 4000)
            ev = p.evaluation
            ratios.append(ev[2000:].std() / ev[:2000].std())
        assert np.median(ratios) > 1.0

    def test_tail_kurtosis(self):
        pre, post = [], []
        for s in range(20):
            p = gen_structural(s, ScenarioKind.STRUCTURAL_TAIL, 2000, 500, 4000)
            z = (p.losses - p.mu) / p.sigma
            ev = z[p.split:]
            pre.append(stats.kurtosis(ev[:2000]))
            post.append(stats.kurtosis(ev[2000:]))
        assert np.median(post) > np.median(pre)

    def test_break_at_end(self):
        p = gen_structural(4, ScenarioKind.STRUCTURAL_VOL, 300, 50, 300)
        assert p.break_index == 350
        assert all(d is p.dists[0] for d in p.dists)

    def test_pre_break_independent_of_post(self):
        a = gen_structural(2, ScenarioKind.STRUCTURAL_TAIL, 100, 50, 200)
        b = gen_structural(2, ScenarioKind.STRUCTURAL_TAIL, 100, 50, 300)
        np.testing.assert_array_equal(a.losses[:150], b.losses[:150])

    def test_bad_break(self):
        with pytest.raises(ValueError):
            gen_structural(0, ScenarioKind.STRUCTURAL_VOL, 0, 10, 100)
        with pytest.raises(ValueError):
            gen_structural(0, ScenarioKind.STATIONARY, 10, 10, 100)


class TestConfig:
    def test_parse(self):
        sc = parse_config("kind = stationary\nseed = 3  # comment\nn = 200\n")
        assert sc.kind is ScenarioKind.STATIONARY and sc.seed == 3 and sc.presample == 500

    def test_alias(self):
        assert parse_config("kind=iid\nl=20").presample == 20

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("kind = iid\nsede = 3\n")
        assert exc.value.key == "sede" and exc.value.line == 2

    def test_bad_value(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("kind = iid\nn = many")
        assert exc.value.key == "n"

    def test_missing_equals(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("kind iid")
        assert exc.value.line == 1

    def test_missing_kind(self):
        with pytest.raises(ConfigError):
            parse_config("seed = 1")

    def test_duplicate(self):
        with pytest.raises(ConfigError):
            parse_config("kind = iid\nkind = iid")

    def test_range(self):
        with pytest.raises(ConfigError):
            parse_config("kind = iid\nes_pct = 0.9")

    def test_generate_tags(self):
        p = parse_config("kind=stationary\npresample=20\nn=30").generate()
        tags = list(p.tags)
        assert tags.count("presample") == 20 and tags.count("eval") == 30

import json

import numpy as np
import pytest

from ebacktest import io as eio
from ebacktest.backtests import BacktestInput, run_standard
from ebacktest.eprocess import RestartPolicy
from ebacktest.exceptions import AlignmentError, DomainError, SchemaError
from ebacktest.kernels import Kind, RiskFunctional
from ebacktest.simulate import gen_iid_scenario


def _write_losses(path, t, loss, split=None, manifest="abc"):
    cols = {"t": t, "loss": loss}
    if split is not None:
        cols["split"] = split
    eio.write_table(path, eio.LOSSES, cols, manifest)


def _write_forecasts(path, t, r, z=None, method="m", functional="EsVar", level=0.95):
    cols = {"t": t, "R": r, "method": [method] * len(t), "functional": [functional] * len(t),
            "level": np.full(len(t), level)}
    if z is not None:
        cols["Z"] = z
    eio.write_table(path, eio.FORECASTS, cols)


def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(50) * 1e-3
    p = tmp_path / "l.csv"
    _write_losses(p, np.arange(50), x, ["presample"] * 5 + ["eval"] * 45)
    tab = eio.read_losses(p)
    assert tab.loss.tobytes() == x.tobytes()
    assert tab.manifest == "abc"
    assert tab.evaluation_mask.sum() == 45


def test_header_comment(tmp_path):
    p = tmp_path / "l.csv"
    _write_losses(p, np.arange(2), np.zeros(2), manifest="f00")
    first = p.read_text().splitlines()[0]
    assert first == "# ebacktest schema=losses/1 manifest=f00"


def test_unknown_column_rejected(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("t,loss,extra\n0,1.0,2\n")
    with pytest.raises(SchemaError):
        eio.read_losses(p)
    with pytest.raises(SchemaError):
        eio.write_table(tmp_path / "x.csv", eio.LOSSES, {"t": [0], "loss": [1.0], "bogus": [1]})


def test_missing_column(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("t\n0\n")
    with pytest.raises(SchemaError):
        eio.read_losses(p)


def test_wrong_schema_tag(tmp_path):
    p = tmp_path / "l.csv"
    _write_losses(p, np.arange(3), np.zeros(3))
    with pytest.raises(SchemaError):
        eio.read_forecasts(p)


def test_unparsable_value_row(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("t,loss\n0,1.0\n1,abc\n")
    with pytest.raises(DomainError) as exc:
        eio.read_losses(p)
    assert exc.value.row == 2


def test_non_increasing_index(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("t,loss\n0,1.0\n0,2.0\n")
    with pytest.raises(AlignmentError):
        eio.read_losses(p)


def test_non_constant_method(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("t,R,method,functional,level\n0,1,a,VaR,0.9\n1,1,b,VaR,0.9\n")
    with pytest.raises(SchemaError):
        eio.read_forecasts(p)


def test_align(tmp_path):
    lp, fp = tmp_path / "l.csv", tmp_path / "f.csv"
    _write_losses(lp, np.arange(10), np.arange(10.0), ["presample"] * 4 + ["eval"] * 6)
    _write_forecasts(fp, np.arange(4, 10), np.ones(6), np.zeros(6))
    x, fc, hist = eio.align(eio.read_losses(lp), eio.read_forecasts(fp), prefix=2)
    np.testing.assert_array_equal(x, np.arange(4.0, 10.0))
    np.testing.assert_array_equal(hist, [2.0, 3.0])
    assert fc[0][1] is not None


def test_align_one_row_short(tmp_path):
    lp, fp = tmp_path / "l.csv", tmp_path / "f.csv"
    _write_losses(lp, np.arange(10), np.zeros(10))
    _write_forecasts(fp, np.arange(9), np.ones(9))
    with pytest.raises(AlignmentError):
        eio.align(eio.read_losses(lp), eio.read_forecasts(fp))


def test_align_index_mismatch(tmp_path):
    lp, fp = tmp_path / "l.csv", tmp_path / "f.csv"
    _write_losses(lp, np.arange(3), np.zeros(3))
    _write_forecasts(fp, np.array([0, 1, 5]), np.ones(3))
    with pytest.raises(AlignmentError, match="row 3"):
        eio.align(eio.read_losses(lp), eio.read_forecasts(fp))


def test_json_stable(tmp_path):
    p = tmp_path / "a.json"
    eio.write_json(p, {"b": np.float64(1.5), "a": [np.int64(2), float("inf"), float("nan")]})
    assert json.loads(p.read_text()) == {"a": [2, "inf", None], "b": 1.5}
    assert p.read_text().index('"a"') < p.read_text().index('"b"')


def test_manifest_hash_ignores_outputs():
    m = {"command": "x", "seed": 1}
    assert eio.manifest_hash(m) == eio.manifest_hash({**m, "outputs": {"f": "h"}})
    assert eio.manifest_hash(m) != eio.manifest_hash({**m, "seed": 2})


def test_replay_final_wealth(tmp_path):
    x, var, es = gen_iid_scenario(3, 10, 1000, es_pct=0.05)
    inp = BacktestInput(x, es, RiskFunctional(Kind.ES_VAR, 0.95), z=var,
                        restart=RestartPolicy.at_fixed_times([400]))
    run = run_standard(inp).run
    p = tmp_path / "e.csv"
    eio.write_table(p, eio.EPROCESS, {
        "t": run.t, "loss": run.loss, "R": run.r, "Z": run.z, "lambda": run.lam, "payoff": run.payoff,
        "log_M": run.log_wealth, "M": run.wealth, "segment": run.segment})
    cols, _ = eio.read_table(p, eio.EPROCESS)
    final = eio.replay_final_wealth(cols["lambda"], cols["payoff"], cols["segment"])
    assert abs(final / run.final_wealth() - 1) < 1e-9


def test_replay_empty():
    assert eio.replay_final_wealth([], [], []) == 1.0

import json
import os

import numpy as np
import pytest

from ebacktest import io as eio
from ebacktest.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main


def _sim(tmp_path, text, name="out"):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    out = tmp_path / name
    assert main(["simulate", str(cfg), "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture()
def iid(tmp_path):
    return _sim(tmp_path, "kind = iid\nseed = 1\nl = 10\nn = 300\nes_pct = 0.1\n")


@pytest.fixture(scope="module")
def stationary(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("st")
    out = _sim(tmp, "kind = stationary\nseed = 2\npresample = 120\nn = 80\n")
    roster = tmp / "roster"
    rc = main(["forecast", str(out / "losses.csv"), "--method", "n-FP,n-FHS", "--functional", "VaR",
               "--level", "0.95", "--window", "100", "--fhs-draws", "2000", "--out", str(roster)])
    assert rc == EXIT_OK
    return out, roster


def test_simulate_iid_files(iid):
    assert sorted(os.listdir(iid)) == ["forecasts.csv", "losses.csv", "manifest.json"]
    f = eio.read_forecasts(iid / "forecasts.csv")
    assert f.t.size == 300 and f.functional == "EsVar"
    man = json.loads((iid / "manifest.json").read_text())
    assert set(man["outputs"]) == {"losses.csv", "forecasts.csv"}
    assert eio.read_losses(iid / "losses.csv").manifest == man["hash"]


def test_simulate_stationary_rows(tmp_path):
    out = _sim(tmp_path, "kind = stationary\npresample = 30\nn = 20\n")
    assert sorted(os.listdir(out)) == ["losses.csv", "manifest.json"]
    assert eio.read_losses(out / "losses.csv").t.size == 50


def test_simulate_deterministic(tmp_path):
    text = "kind = structural1\nseed = 4\npresample = 20\nn = 100\nb_star = 50\n"
    cfg = tmp_path / "s.cfg"
    cfg.write_text(text)
    for d in ("a", "b"):
        assert main(["simulate", str(cfg), "--out", str(tmp_path / d)]) == EXIT_OK
    for fn in ("losses.csv", "manifest.json"):
        assert eio.file_sha256(tmp_path / "a" / fn) == eio.file_sha256(tmp_path / "b" / fn)


def test_simulate_bad_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("kind = iid\nnn = 3\n")
    assert main(["simulate", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "'nn'" in capsys.readouterr().err


def test_output_dir_from_env(tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kind = iid\nn = 5\n")
    monkeypatch.setenv("EBACKTEST_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["simulate", str(cfg)]) == EXIT_OK
    assert (tmp_path / "env" / "losses.csv").exists()


def test_backtest_standard(iid, tmp_path):
    out = tmp_path / "bt"
    rc = main(["backtest", str(iid / "losses.csv"), str(iid / "forecasts.csv"), "--c", "1",
               "--alpha", "0.1", "--prefix", "10", "--out", str(out)])
    assert rc == EXIT_OK
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["rejected"] is True and verdict["first_hit"] >= 1
    cols, meta = eio.read_table(out / "eprocess.csv", eio.EPROCESS)
    assert meta["manifest"] == verdict["manifest"]
    final = eio.replay_final_wealth(cols["lambda"], cols["payoff"], cols["segment"])
    assert abs(final / cols["M"][-1] - 1) < 1e-9


def test_backtest_identical_comparative(iid, tmp_path):
    out = tmp_path / "cmp"
    f = str(iid / "forecasts.csv")
    # ten presample rows give too tight a default bound for 300 normal losses
    assert main(["backtest", str(iid / "losses.csv"), f, f, "--out", str(out)]) == EXIT_DATA
    rc = main(["backtest", str(iid / "losses.csv"), f, f, "--M", "6", "--out", str(out)])
    assert rc == EXIT_OK
    v = json.loads((out / "verdict.json").read_text())
    assert v["zone"] == "Yellow" and v["sup_minus"] == 1.0 and v["sup_plus"] == 1.0
    cols, _ = eio.read_table(out / "eprocess.csv", eio.EPROCESS_COMPARATIVE)
    assert np.all(cols["M_minus"] == 1.0)


def test_backtest_row_short(iid, tmp_path):
    lines = (iid / "forecasts.csv").read_text().splitlines()
    short = tmp_path / "short.csv"
    short.write_text("\n".join(lines[:-1]) + "\n")
    assert main(["backtest", str(iid / "losses.csv"), str(short), "--out", str(tmp_path)]) == EXIT_DATA


def test_backtest_functional_mismatch(iid, tmp_path):
    rc = main(["backtest", str(iid / "losses.csv"), str(iid / "forecasts.csv"), "--functional", "VaR",
               "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_backtest_bad_restart(iid, tmp_path):
    rc = main(["backtest", str(iid / "losses.csv"), str(iid / "forecasts.csv"), "--restart", "often",
               "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_backtest_schema_error(iid, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,R,method,functional,level,colour\n")
    assert main(["backtest", str(iid / "losses.csv"), str(bad), "--out", str(tmp_path)]) == EXIT_DATA


def test_forecast_outputs(stationary):
    _, roster = stationary
    f = eio.read_forecasts(roster / "forecasts_n-FHS.csv")
    assert f.t[0] == 120 and f.t.size == 80 and f.method == "n-FHS"


def test_forecast_needs_presample(stationary, tmp_path):
    losses, _ = stationary
    rc = main(["forecast", str(losses / "losses.csv"), "--method", "n-FP", "--functional", "VaR",
               "--level", "0.95", "--window", "500", "--out", str(tmp_path)])
    assert rc == EXIT_DATA


def test_heatmap(stationary, tmp_path):
    losses, roster = stationary
    out = tmp_path / "hm"
    rc = main(["heatmap", str(losses / "losses.csv"), str(roster), "--out", str(out)])
    assert rc == EXIT_OK
    doc = json.loads((out / "heatmap.json").read_text())
    assert doc["models"] == ["n-FHS", "n-FP"]
    assert doc["zones"][0][0] == "Yellow" and doc["zones"][1][1] == "Yellow"


def test_heatmap_missing_roster(stationary, tmp_path):
    losses, roster = stationary
    assert main(["heatmap", str(losses / "losses.csv"), str(tmp_path / "none")]) == EXIT_CONFIG
    rc = main(["heatmap", str(losses / "losses.csv"), str(roster), "--models", "n-FP,st-EVT",
               "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_table1_small(tmp_path):
    out = tmp_path / "t1"
    assert main(["table1", "--seeds", "3", "--n", "100", "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "table1.json").read_text())
    assert np.array(doc["rates"]).shape == (4, 6)

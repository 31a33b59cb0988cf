"""
Command-line front end.

    ebacktest simulate CONFIG
    ebacktest forecast LOSSES --method st-FHS --functional esvar --level 0.975
    ebacktest backtest LOSSES FORECASTS [STANDARD_FORECASTS]
    ebacktest heatmap LOSSES ROSTER_DIR
    ebacktest table1 --seeds 200

Outputs go to ``--out``, else ``$EBACKTEST_OUTPUT_DIR``, else the current
directory.  Every run writes ``manifest.json``; every CSV it writes carries
the manifest hash in its first line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ebacktest import __version__
from ebacktest import io as eio
from ebacktest._corelib import IMPLEMENTATION
from ebacktest.backtests import (
    DEFAULT_THRESHOLDS,
    BacktestInput,
    heatmap,
    run_comparative,
    run_standard,
    support_bound_from_warmup,
    verdict_record,
)
from ebacktest.betting import BettingConfig
from ebacktest.eprocess import RestartPolicy
from ebacktest.exceptions import (
    AlignmentError,
    ConfigError,
    DomainError,
    FitError,
    InvalidStep,
    SchemaError,
)
from ebacktest.forecast.rolling import ForecastMethod, rolling_roster
from ebacktest.kernels import Homogeneity, Kind, RiskFunctional, Variant
from ebacktest.simulate import IidPath, load_config

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_DATA", "EXIT_NUMERIC"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

OUTPUT_ENV = "EBACKTEST_OUTPUT_DIR"
SUPPORT_FACTOR = 1.5


def _out_dir(args):
    d = args.out or os.environ.get(OUTPUT_ENV) or os.getcwd()
    os.makedirs(d, exist_ok=True)
    return d


def _base_manifest(args, command):
    return {"command": command, "version": __version__, "core": IMPLEMENTATION}


def _input_record(path):
    return {"path": os.path.abspath(path), "sha256": eio.file_sha256(path)}


def _thresholds(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"thresholds must be comma-separated numbers, got {text!r}") from None
    if not vals or any(not v > 1.0 for v in vals):
        raise ConfigError("thresholds must exceed 1", key="thresholds")
    return vals


def _betting(args):
    try:
        return BettingConfig(method=args.bet, c=args.c)
    except ValueError as err:
        raise ConfigError(str(err), key="betting") from None


def _restart(args):
    try:
        return RestartPolicy.parse(args.restart)
    except ValueError as err:
        raise ConfigError(str(err), key="restart") from None


def _functional(name, level):
    try:
        return RiskFunctional(Kind.parse(name), level)
    except ValueError as err:
        raise ConfigError(str(err), key="functional") from None


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    scenario = load_config(args.config)
    path = scenario.generate()
    out = _out_dir(args)
    manifest = _base_manifest(args, "simulate")
    manifest.update(scenario=scenario.to_dict(), config=_input_record(args.config))
    h = eio.manifest_hash(manifest)
    t = np.arange(path.losses.size, dtype=np.int64)
    written = []
    losses_csv = os.path.join(out, "losses.csv")
    eio.write_table(losses_csv, eio.LOSSES, {"t": t, "loss": path.losses, "split": list(path.tags)}, h)
    written.append(losses_csv)
    if isinstance(path, IidPath):
        f_csv = os.path.join(out, "forecasts.csv")
        ev = slice(path.split, None)
        m = t[ev].size
        eio.write_table(f_csv, eio.FORECASTS, {
            "t": t[ev], "R": path.es[ev], "Z": path.var[ev], "method": ["noisy"] * m,
            "functional": [Kind.ES_VAR.value] * m, "level": np.full(m, 0.95)}, h)
        written.append(f_csv)
    eio.write_manifest(out, manifest, written)
    print(f"wrote {', '.join(os.path.basename(p) for p in written)} to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# forecast


def cmd_forecast(args):
    table = eio.read_losses(args.losses)
    f = _functional(args.functional, args.level)
    try:
        methods = [ForecastMethod.parse(m, window=args.window, fhs_draws=args.fhs_draws,
                                        refit_every=args.refit_every)
                   for m in args.method.split(",")]
    except ValueError as err:
        raise ConfigError(str(err), key="method") from None
    mask = table.evaluation_mask
    start = int(np.argmax(mask)) if mask.any() else table.t.size
    if start < args.window:
        raise DomainError(f"need {args.window} presample losses before the first evaluation day, "
                          f"found {start}")
    series = rolling_roster(table.loss, methods, f, seed=args.seed, start=start)
    out = _out_dir(args)
    manifest = _base_manifest(args, "forecast")
    manifest.update(losses=_input_record(args.losses), functional=f.kind.value, level=f.p,
                    methods=[m.name for m in methods], window=args.window, seed=args.seed,
                    fhs_draws=args.fhs_draws, refit_every=args.refit_every)
    h = eio.manifest_hash(manifest)
    written = []
    for name, s in series.items():
        m = len(s)
        cols = {"t": table.t[s.t], "R": s.r, "method": [name] * m,
                "functional": [f.kind.value] * m, "level": np.full(m, f.level)}
        if s.z is not None:
            cols["Z"] = s.z
        p = os.path.join(out, f"forecasts_{name}.csv")
        eio.write_table(p, eio.FORECASTS, cols, h)
        written.append(p)
        if s.missing.any():
            print(f"{name}: {int(s.missing.sum())} day(s) carried forward after failed fits",
                  file=sys.stderr)
    eio.write_manifest(out, manifest, written)
    print(f"wrote {', '.join(os.path.basename(p) for p in written)} to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# backtest / heatmap


def _resolve_functional(args, tables):
    kinds = {t.functional for t in tables}
    levels = {t.level for t in tables if not np.isnan(t.level)}
    if len(kinds) > 1 or len(levels) > 1:
        raise ConfigError("forecast files disagree on functional or level")
    name = kinds.pop() if kinds else ""
    try:
        file_kind = Kind.parse(name) if name else None
    except ValueError as err:
        raise SchemaError(f"forecast file: {err}") from None
    file_level = levels.pop() if levels else None
    kind = _functional(args.functional, 0.5).kind if args.functional else file_kind
    if kind is None:
        raise ConfigError("no functional given and none recorded in the forecast file",
                          key="functional")
    if file_kind is not None and kind is not file_kind:
        raise ConfigError(f"forecast file holds {file_kind.value}, not {kind.value}",
                          key="functional")
    level = args.level if args.level is not None else file_level
    if file_level is not None and level is not None and abs(level - file_level) > 1e-12:
        raise ConfigError(f"forecast file holds level {file_level}, not {level}", key="level")
    return _functional(kind.value, level)


def _support_bound(args, losses):
    if args.M is not None:
        return float(args.M)
    mask = losses.evaluation_mask
    warm = args.warmup if args.warmup is not None else int(np.sum(~mask))
    if warm < 1:
        raise ConfigError("comparative backtests need --M or presample rows (or --warmup) "
                          "to fix the support bound", key="M")
    return support_bound_from_warmup(losses.loss, warm, SUPPORT_FACTOR)


def _enum(cls, text, key):
    if text is None:
        return None
    for member in cls:
        if text.lower() in (member.name.lower(), member.value.lower()):
            return member
    raise ConfigError(f"unknown value {text!r}", key=key)


def _eprocess_columns(t, result, comparative, two_sided):
    if comparative:
        rm, rp = result.run_minus, result.run_plus
        cols = {
            "t": t, "loss": rm.loss, "R": rm.r, "R_star": rm.r_star,
            "lambda_minus": rm.lam, "payoff_minus": rm.payoff, "log_M_minus": rm.log_wealth,
            "M_minus": rm.wealth, "lambda_plus": rp.lam, "payoff_plus": rp.payoff,
            "log_M_plus": rp.log_wealth, "M_plus": rp.wealth, "segment": rm.segment,
        }
        if rm.z is not None:
            cols.update(Z=rm.z, Z_star=rm.z_star)
        return eio.EPROCESS_COMPARATIVE, cols
    run = result.run
    cols = {"t": t, "loss": run.loss, "R": run.r, "lambda": run.lam, "payoff": run.payoff,
            "log_M": run.log_wealth, "M": run.wealth, "segment": run.segment}
    if run.z is not None:
        cols["Z"] = run.z
    if two_sided:
        cols.update(payoff_partner=run.payoff2, log_M_partner=run.log_wealth2)
    return eio.EPROCESS, cols


def cmd_backtest(args):
    losses = eio.read_losses(args.losses)
    internal = eio.read_forecasts(args.forecasts)
    tables = [internal]
    standard = None
    if args.standard:
        standard = eio.read_forecasts(args.standard)
        tables.append(standard)
    comparative = standard is not None
    x, fc, history = eio.align(losses, *tables, prefix=args.prefix)
    f = _resolve_functional(args, tables)
    if comparative:
        f = f.with_bound(_support_bound(args, losses))
    elif args.M is not None:
        f = f.with_bound(args.M)
    thresholds = _thresholds(args.thresholds)
    alpha = args.alpha
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}", key="alpha")
    betting, restart = _betting(args), _restart(args)
    (r, z) = fc[0]
    rs, zs = fc[1] if comparative else (None, None)
    inp = BacktestInput(
        x, r, f, z=z, r_star=rs, z_star=zs, alpha=alpha, betting=betting, restart=restart,
        variant=_enum(Variant, args.variant, "variant") or Variant.RATIO,
        homogeneity=_enum(Homogeneity, args.homogeneity, "homogeneity"),
        two_sided=args.two_sided, prefix=history if history.size else None,
        thresholds=thresholds,
    )
    result = run_comparative(inp) if comparative else run_standard(inp)

    out = _out_dir(args)
    manifest = _base_manifest(args, "backtest")
    manifest.update(
        losses=_input_record(args.losses), forecasts=_input_record(args.forecasts),
        standard_forecasts=_input_record(args.standard) if comparative else None,
        functional=f.kind.value, level=f.p, support_bound=f.M, alpha=alpha,
        thresholds=list(thresholds), betting=vars(betting).copy(), restart=restart.describe(),
        variant=inp.variant.value,
        homogeneity=None if inp.homogeneity is None else inp.homogeneity.value,
        two_sided=args.two_sided, prefix=int(history.size),
    )
    manifest["betting"]["method"] = betting.method.value
    h = eio.manifest_hash(manifest)
    t_eval = losses.t[losses.evaluation_mask]
    schema, cols = _eprocess_columns(t_eval, result, comparative, args.two_sided)
    ep_csv = os.path.join(out, "eprocess.csv")
    eio.write_table(ep_csv, schema, cols, h)
    if comparative:
        verdict = verdict_record(result, internal.method, standard.method, f)
    else:
        verdict = {"method": internal.method, "functional": f.kind.value, "level": f.p}
        verdict.update(result.to_dict())
    verdict["manifest"] = h
    v_json = os.path.join(out, "verdict.json")
    eio.write_json(v_json, verdict)
    eio.write_manifest(out, manifest, [ep_csv, v_json])
    if comparative:
        v = result.verdict
        print(f"{internal.method} vs {standard.method}: {v.zone.value} "
              f"(sup M- = {v.sup_minus:.4g}, sup M+ = {v.sup_plus:.4g})")
    else:
        print(f"{internal.method}: {'rejected' if result.rejected else 'not rejected'} "
              f"(sup M = {result.stats.sup:.4g})")
    return EXIT_OK


def _roster_files(args):
    d = args.roster
    if not os.path.isdir(d):
        raise ConfigError(f"roster directory {d!r} does not exist", key="roster")
    if args.models:
        names = [m.strip() for m in args.models.split(",") if m.strip()]
        files = []
        for name in names:
            cands = [os.path.join(d, f"forecasts_{name}.csv"), os.path.join(d, f"{name}.csv")]
            hit = next((p for p in cands if os.path.isfile(p)), None)
            if hit is None:
                raise ConfigError(f"no forecast file for model {name!r} in {d}", key="models")
            files.append(hit)
        return files
    files = sorted(os.path.join(d, fn) for fn in os.listdir(d) if fn.endswith(".csv"))
    if not files:
        raise ConfigError(f"roster directory {d!r} holds no CSV files", key="roster")
    return files


def cmd_heatmap(args):
    losses = eio.read_losses(args.losses)
    files = _roster_files(args)
    tables = [eio.read_forecasts(p) for p in files]
    names = [t.method or os.path.splitext(os.path.basename(p))[0] for t, p in zip(tables, files)]
    if len(set(names)) != len(names):
        raise ConfigError("roster holds two files for the same model", key="roster")
    x, fc, history = eio.align(losses, *tables, prefix=args.prefix)
    f = _resolve_functional(args, tables).with_bound(_support_bound(args, losses))
    thresholds = _thresholds(args.thresholds)
    betting, restart = _betting(args), _restart(args)
    roster = {n: (r if z is None else (r, z)) for n, (r, z) in zip(names, fc)}
    hm = heatmap(x, roster, f, alpha=args.alpha, betting=betting, restart=restart,
                 homogeneity=_enum(Homogeneity, args.homogeneity, "homogeneity"),
                 prefix=history if history.size else None, thresholds=thresholds,
                 workers=args.workers)
    out = _out_dir(args)
    manifest = _base_manifest(args, "heatmap")
    manifest.update(losses=_input_record(args.losses),
                    roster={n: _input_record(p) for n, p in zip(names, files)},
                    functional=f.kind.value, level=f.p, support_bound=f.M, alpha=args.alpha,
                    thresholds=list(thresholds), c=betting.c, betting_method=betting.method.value,
                    restart=restart.describe())
    h = eio.manifest_hash(manifest)
    doc = hm.to_dict()
    doc["manifest"] = h
    hm_json = os.path.join(out, "heatmap.json")
    eio.write_json(hm_json, doc)
    eio.write_manifest(out, manifest, [hm_json])
    width = max(len(n) for n in names)
    print(" " * (width + 1) + " ".join(f"{n:>{width}}" for n in names) + "   (internal)")
    for name, row in zip(names, hm.zones()):
        print(f"{name:>{width}} " + " ".join(f"{z:>{width}}" for z in row))
    return EXIT_OK


# ---------------------------------------------------------------------------
# table1


def cmd_table1(args):
    from ebacktest.pipelines import table1

    thresholds = _thresholds(args.thresholds)
    if args.seeds < 1 or args.n < 1:
        raise ConfigError("seeds and n must be positive")
    res = table1(seeds=args.seeds, n=args.n, l=args.l, c=args.c, thresholds=thresholds)
    out = _out_dir(args)
    manifest = _base_manifest(args, "table1")
    manifest.update(seeds=args.seeds, n=args.n, l=args.l, c=args.c, thresholds=list(thresholds))
    doc = res.to_dict()
    doc["manifest"] = eio.manifest_hash(manifest)
    if tuple(thresholds) != tuple(TABLE1_DEFAULT):
        doc.pop("reference")
    p = os.path.join(out, "table1.json")
    eio.write_json(p, doc)
    eio.write_manifest(out, manifest, [p])
    if tuple(thresholds) == tuple(TABLE1_DEFAULT):
        print(res.format())
    else:
        print(np.array2string(res.rates, precision=4))
    return EXIT_OK


TABLE1_DEFAULT = (2.0, 5.0, 10.0, 20.0)


# ---------------------------------------------------------------------------


def _add_common(p, comparative=True):
    p.add_argument("--functional", help="VaR, EsVar, Mean, MeanVariance, Expectile, "
                                        "ExpectileVariantile (default: from the forecast file)")
    p.add_argument("--level", type=float, help="risk level p (default: from the forecast file)")
    p.add_argument("--alpha", type=float, default=0.1, help="test level; rejection at 1/alpha")
    p.add_argument("--c", type=float, default=0.5, help="bet truncation c in (0, 1]")
    p.add_argument("--bet", default="taylor", help="betting rule: taylor or exact")
    p.add_argument("--restart", default="none", help="none, fixed:T1,T2,... or rejection:K")
    p.add_argument("--thresholds", default=",".join(f"{v:g}" for v in DEFAULT_THRESHOLDS))
    p.add_argument("--prefix", type=int, default=0,
                   help="presample losses used as betting history")
    p.add_argument("--M", type=float, help="loss support bound (default: 1.5 x max |loss| "
                                           "over the presample rows)")
    p.add_argument("--warmup", type=int, help="rows used for the default support bound")
    p.add_argument("--homogeneity", help="scoring homogeneity: H0, HHalf, H1, H2 or None")


def build_parser():
    ap = argparse.ArgumentParser(prog="ebacktest", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a scenario from a key = value config")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forecast", help="rolling AR(1)-GARCH(1,1) risk forecasts")
    p.add_argument("losses")
    p.add_argument("--method", required=True, help="comma-separated, e.g. n-FP,st-FHS")
    p.add_argument("--functional", required=True)
    p.add_argument("--level", type=float)
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fhs-draws", type=int, default=10_000)
    p.add_argument("--refit-every", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("backtest", help="standard or comparative e-backtest")
    p.add_argument("losses")
    p.add_argument("forecasts", help="internal model forecasts")
    p.add_argument("standard", nargs="?", help="standard model forecasts (comparative mode)")
    _add_common(p)
    p.add_argument("--variant", help="identification form: ratio or bounded")
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("heatmap", help="pairwise comparative backtests over a roster")
    p.add_argument("losses")
    p.add_argument("roster", help="directory of forecast CSVs")
    p.add_argument("--models", help="comma-separated model names fixing the axis order")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_heatmap, alpha=0.5)
    p.set_defaults(thresholds="2")

    p = sub.add_parser("table1", help="rejection rates of the iid (ES, VaR) experiment")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--thresholds", default="2,5,10,20")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        code, msg = EXIT_CONFIG, err
    except (DomainError, AlignmentError, SchemaError) as err:
        code, msg = EXIT_DATA, err
    except (InvalidStep, FitError) as err:
        code, msg = EXIT_NUMERIC, err
    print(f"ebacktest: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

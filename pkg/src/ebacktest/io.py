"""
Versioned CSV/JSON files and run manifests.

Every CSV starts with a comment line naming its schema and the manifest
that produced it, followed by a header row::

    # ebacktest schema=forecasts/1 manifest=3f2a9c0d1b7e4a55
    t,R,Z,method,functional,level
    500,1.9731...,1.4410...,st-FHS,EsVar,0.975

The day index column is always ``t`` (integers, strictly increasing).
Floats are written with ``repr`` so they round-trip exactly.  Columns
outside the schema are rejected.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from ebacktest._corelib import core
from ebacktest.eprocess import _reset_from_segments
from ebacktest.exceptions import AlignmentError, DomainError, SchemaError

__all__ = [
    "Schema",
    "LOSSES",
    "FORECASTS",
    "EPROCESS",
    "EPROCESS_COMPARATIVE",
    "SCHEMAS",
    "write_table",
    "read_table",
    "read_losses",
    "read_forecasts",
    "LossTable",
    "ForecastTable",
    "align",
    "to_jsonable",
    "write_json",
    "file_sha256",
    "manifest_hash",
    "write_manifest",
    "replay_final_wealth",
]

_COMMENT = "# ebacktest"


@dataclass(frozen=True)
class Schema:
    name: str
    version: int
    required: tuple
    optional: tuple = ()
    text: tuple = ()  # string-valued columns
    integer: tuple = ("t",)

    @property
    def tag(self):
        return f"{self.name}/{self.version}"

    @property
    def columns(self):
        return self.required + self.optional

    def order(self, present):
        return [c for c in self.columns if c in present]


LOSSES = Schema("losses", 1, ("t", "loss"), ("split",), text=("split",))
FORECASTS = Schema("forecasts", 1, ("t", "R", "method", "functional", "level"), ("Z",),
                   text=("method", "functional"))
EPROCESS = Schema(
    "eprocess", 1,
    ("t", "loss", "R", "lambda", "payoff", "log_M", "M", "segment"),
    ("Z", "payoff_partner", "log_M_partner"),
    integer=("t", "segment"),
)
EPROCESS_COMPARATIVE = Schema(
    "eprocess_comparative", 1,
    ("t", "loss", "R", "R_star", "lambda_minus", "payoff_minus", "log_M_minus", "M_minus",
     "lambda_plus", "payoff_plus", "log_M_plus", "M_plus", "segment"),
    ("Z", "Z_star"),
    integer=("t", "segment"),
)
SCHEMAS = {s.name: s for s in (LOSSES, FORECASTS, EPROCESS, EPROCESS_COMPARATIVE)}


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(path, schema: Schema, columns: dict, manifest=None):
    """Write ``columns`` (name -> sequence) under ``schema``."""
    unknown = sorted(set(columns) - set(schema.columns))
    if unknown:
        raise SchemaError(f"{schema.tag}: unknown column(s) {', '.join(unknown)}")
    missing = [c for c in schema.required if c not in columns]
    if missing:
        raise SchemaError(f"{schema.tag}: missing column(s) {', '.join(missing)}")
    names = schema.order(columns)
    cols = [columns[c] for c in names]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise AlignmentError(f"{schema.tag}: columns have different lengths")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{_COMMENT} schema={schema.tag} manifest={manifest or '-'}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(c[i]) for c in cols])


def _parse_comment(line):
    out = {}
    for part in line[len(_COMMENT):].split():
        k, _, v = part.partition("=")
        out[k] = v
    return out


def read_table(path, schema: Schema):
    """Read a CSV written under ``schema``; returns ``(columns, meta)``.

    Raises
    ------
    SchemaError
        Wrong schema tag, unknown or missing columns.
    DomainError
        Unparsable value (``row`` is the 1-based data row).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise SchemaError(f"cannot read {path}: {err.strerror}") from err
    with fh:
        lines = fh.read().splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        if lines[0].startswith(_COMMENT):
            meta = _parse_comment(lines[0])
        lines.pop(0)
    tag = meta.get("schema")
    if tag is not None and tag != schema.tag:
        raise SchemaError(f"{path}: schema {tag}, expected {schema.tag}")
    rows = list(csv.reader(lines))
    if not rows:
        raise SchemaError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    unknown = [h for h in header if h not in schema.columns]
    if unknown:
        raise SchemaError(f"{path}: unknown column(s) {', '.join(unknown)} for {schema.tag}")
    missing = [c for c in schema.required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)} for {schema.tag}")
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names")
    data = rows[1:]
    cols = {}
    for j, name in enumerate(header):
        raw = []
        for i, row in enumerate(data, start=1):
            if len(row) != len(header):
                raise DomainError(f"{path}: expected {len(header)} fields, got {len(row)}", row=i)
            raw.append(row[j].strip())
        if name in schema.text:
            cols[name] = raw
            continue
        try:
            if name in schema.integer:
                cols[name] = np.array([int(v) for v in raw], dtype=np.int64)
            else:
                cols[name] = np.array([float(v) for v in raw], dtype=float)
        except ValueError:
            bad = next(i for i, v in enumerate(raw, start=1) if not _parses(v, name in schema.integer))
            raise DomainError(f"{path}: column {name!r} has an unparsable value", row=bad) from None
    t = cols["t"]
    if t.size > 1 and np.any(np.diff(t) <= 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 2
        raise AlignmentError(f"{path}: day index t must be strictly increasing (row {bad})")
    return cols, meta


def _parses(v, integer):
    try:
        int(v) if integer else float(v)
        return True
    except ValueError:
        return False


@dataclass
class LossTable:
    t: np.ndarray
    loss: np.ndarray
    split: list | None = None
    manifest: str | None = None

    @property
    def evaluation_mask(self):
        if self.split is None:
            return np.ones(self.t.size, dtype=bool)
        return np.array([s != "presample" for s in self.split])


@dataclass
class ForecastTable:
    t: np.ndarray
    r: np.ndarray
    z: np.ndarray | None
    method: str
    functional: str
    level: float
    manifest: str | None = None


def read_losses(path) -> LossTable:
    cols, meta = read_table(path, LOSSES)
    split = cols.get("split")
    if split is not None:
        bad = [i for i, s in enumerate(split, start=1) if s not in ("presample", "eval")]
        if bad:
            raise DomainError(f"{path}: split must be 'presample' or 'eval'", row=bad[0])
    return LossTable(cols["t"], cols["loss"], split, meta.get("manifest"))


def read_forecasts(path) -> ForecastTable:
    cols, meta = read_table(path, FORECASTS)
    for name in ("method", "functional"):
        if len(set(cols[name])) > 1:
            raise SchemaError(f"{path}: column {name!r} must be constant")
    levels = cols["level"]
    if levels.size and np.any(levels != levels[0]):
        raise SchemaError(f"{path}: column 'level' must be constant")
    n = cols["t"].size
    return ForecastTable(
        cols["t"], cols["R"], cols.get("Z"),
        cols["method"][0] if n else "", cols["functional"][0] if n else "",
        float(levels[0]) if n else math.nan, meta.get("manifest"),
    )


def align(losses: LossTable, *forecasts: ForecastTable, prefix=0):
    """Evaluation losses and forecast arrays on a common day index.

    Forecast files must cover exactly the evaluation days of the loss file
    (all days when it carries no ``split`` column).  ``prefix`` losses
    immediately before the first evaluation day are returned as betting
    history.

    Returns
    -------
    (x, [(r, z), ...], history)
    """
    mask = losses.evaluation_mask
    t_eval = losses.t[mask]
    x = losses.loss[mask]
    out = []
    for f in forecasts:
        if f.t.size != t_eval.size:
            raise AlignmentError(
                f"forecasts for {f.method or 'model'} have {f.t.size} rows, "
                f"losses have {t_eval.size} evaluation rows")
        if not np.array_equal(f.t, t_eval):
            i = int(np.flatnonzero(f.t != t_eval)[0])
            raise AlignmentError(f"day index mismatch at row {i + 1}: forecast t={f.t[i]}, "
                                 f"loss t={t_eval[i]}")
        out.append((f.r, f.z))
    history = np.zeros(0)
    if prefix and t_eval.size:
        before = losses.loss[losses.t < t_eval[0]]
        history = before[-int(prefix):]
    return x, out, history


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, enums and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, (int, str)):
        return obj.value
    return obj


def _dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps(obj) + "\n")


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_hash(manifest: dict) -> str:
    """Short hash of the run definition (everything except outputs)."""
    core_fields = {k: v for k, v in manifest.items() if k not in ("outputs", "hash")}
    return hashlib.sha256(_dumps(core_fields).encode("utf-8")).hexdigest()[:16]


def write_manifest(out_dir, manifest: dict, outputs=()):
    """Write ``manifest.json`` with the output file hashes; returns its path."""
    m = dict(manifest)
    m["hash"] = manifest_hash(manifest)
    m["outputs"] = {os.path.basename(p): file_sha256(p) for p in outputs}
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, m)
    return path


def replay_final_wealth(lam, payoff, segment):
    """Final ``M`` recomputed from per-day bets, payoffs and segment ids."""
    lam = np.ascontiguousarray(lam, dtype=float)
    g = np.ascontiguousarray(payoff, dtype=float)
    if lam.size == 0:
        return 1.0
    reset = _reset_from_segments(np.asarray(segment, dtype=np.int64))
    logw, _ = core.wealth_path(lam, g, reset, math.inf)
    return float(np.exp(logw[-1]))

"""CSV emission and parsing for run records and experiment tables.

Files carry ``# key=value`` provenance lines, then a header row, then data
rows with 17 significant digits so float64 values round-trip exactly.  Row
and column order is deterministic.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import ConfigurationError


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return f"{float(value):.17g}"
    return str(value)


def emit_table(path: str, columns: dict, meta: dict | None = None) -> None:
    """Write named columns (equal length sequences) as CSV."""
    names = list(columns.keys())
    arrays = [list(columns[n]) for n in names]
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError(f"column lengths differ: { {n: len(a) for n, a in zip(names, arrays)} }")
    n_rows = lengths.pop() if lengths else 0

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}={_format((meta or {})[key])}\n")
        fh.write(",".join(names) + "\n")
        for i in range(n_rows):
            fh.write(",".join(_format(col[i]) for col in arrays) + "\n")


def parse_table(path: str):
    """Read a table written by :func:`emit_table`.

    Returns (meta, columns) with numeric columns as float arrays and
    anything non-numeric as lists of strings.
    """
    meta: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("# "):
            key, _, value = ln[2:].partition("=")
            meta[key] = value
        elif ln:
            body.append(ln)
    if not body:
        raise ConfigurationError(f"{path}: missing header row")
    names = body[0].split(",")
    raw = [row.split(",") for row in body[1:]]
    for row in raw:
        if len(row) != len(names):
            raise ConfigurationError(f"{path}: ragged row {row}")
    columns: dict = {}
    for j, name in enumerate(names):
        vals = [row[j] for row in raw]
        try:
            columns[name] = np.array([float(v) for v in vals])
        except ValueError:
            columns[name] = vals
    return meta, columns


def emit_run_record(path: str, record, meta: dict | None = None) -> None:
    """Time series of a single-population run."""
    base = dict(meta or {})
    base["status"] = record.status
    base["dt"] = record.dt
    if record.blowup_time is not None:
        base["blowup_time"] = record.blowup_time
    emit_table(
        path,
        {"t": record.times, "rate": record.rates, "mass": record.masses},
        base,
    )


def emit_twopop_record(path: str, record, meta: dict | None = None) -> None:
    base = dict(meta or {})
    base["status"] = record.status
    base["dt"] = record.dt
    if record.trip_time_e is not None:
        base["trip_time_e"] = record.trip_time_e
    if record.trip_time_i is not None:
        base["trip_time_i"] = record.trip_time_i
    emit_table(
        path,
        {
            "t": record.times,
            "rate_e": record.rate_e,
            "rate_i": record.rate_i,
            "mass_e": record.mass_e,
            "mass_i": record.mass_i,
            "refractory_e": record.refractory_e,
            "refractory_i": record.refractory_i,
        },
        base,
    )


def emit_snapshot(path: str, snapshot, meta: dict | None = None) -> None:
    base = dict(meta or {})
    base["t"] = snapshot.t
    emit_table(path, {"v": snapshot.grid, "density": snapshot.density}, base)

"""Report serialization: CSV (6-decimal rates) and JSON-lines (full precision).

Every record carries a ``schema`` stamp so files are self-describing and
round-trip losslessly through the JSON-lines form.
"""

from __future__ import annotations

import csv
import json
import math

SCHEMA_BOUNDS = "skec.bounds/1"
SCHEMA_SWEEP = "skec.sweep/1"
SCHEMA_SIMULATE = "skec.simulate/1"
SCHEMA_SESSION = "skec.session/1"
SCHEMA_VALIDATE = "skec.validate/1"

# Columns holding rates/probabilities: fixed to 6 decimals in CSV output.
_RATE_PREFIXES = ("value", "ratio", "constraint_slack", "upper", "lower",
                  "p_error", "key_entropy", "leakage", "rate", "r_sk", "r_icc",
                  "epsilon", "alpha", "beta", "param_value", "l_a", "l_b",
                  "lp_a", "lp_b", "lp", "capacity_sd_iid", "delta",
                  "p_error_half_width", "key_entropy_plugin")


def _csv_cell(key: str, value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if key.startswith(_RATE_PREFIXES):
            return f"{value:.6f}"
        return repr(value)
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def write_csv(path: str, rows: list[dict], columns: list[str] | None = None) -> None:
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(c, row.get(c)) for c in columns])


def _json_default(value):
    try:
        import numpy as np

        if isinstance(value, np.integer):
            return int(value)
        if isinstance(value, np.floating):
            return float(value)
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"not JSON serializable: {type(value)!r}")


def write_jsonl(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(_sanitize(row), separators=(",", ":"),
                                default=_json_default))
            fh.write("\n")


def _sanitize(value):
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def read_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_rows(path: str, rows: list[dict], fmt: str,
               columns: list[str] | None = None) -> None:
    if fmt == "csv":
        write_csv(path, rows, columns)
    elif fmt == "jsonl":
        write_jsonl(path, rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")

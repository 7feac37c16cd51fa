"""CSV and JSON report writers with a fixed float format."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """17 significant digits, '.' decimal, literal 'nan' / 'inf' / '-inf'."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if v is None:
        return ""
    return str(v)


def has_nan(rows) -> bool:
    for row in rows:
        for v in row.values():
            if isinstance(v, (float, np.floating)) and math.isnan(v):
                return True
    return False


def csv_text(rows: list[dict], columns: list[str] | None = None, quantity: str | None = None) -> str:
    """Header plus one line per row.  ``quantity`` fills a leading column naming what is measured."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    if quantity is not None:
        columns = ["quantity"] + [c for c in columns if c != "quantity"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        full = dict(row)
        if quantity is not None:
            full.setdefault("quantity", quantity)
        writer.writerow([_cell(full.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None, quantity=None) -> Path:
    path = Path(path)
    path.write_text(csv_text(rows, columns, quantity), encoding="utf-8", newline="")
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no NaN; store the same literal the CSV uses
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json_text(obj), encoding="utf-8", newline="")
    return path


def json_has_nan(obj) -> bool:
    if isinstance(obj, dict):
        return any(json_has_nan(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return any(json_has_nan(v) for v in obj)
    if isinstance(obj, (float, np.floating)):
        return math.isnan(obj)
    return False

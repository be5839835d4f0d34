"""Deterministic JSON-lines and CSV writers.

Floats are printed with 17 significant digits so every value round-trips
exactly; non-finite floats become the strings ``"inf"``, ``"-inf"`` and
``"nan"``.  Keys keep insertion order.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

SCHEMA = 1


def format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj) -> str:
    """Compact JSON with fixed float formatting."""
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, Mapping):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(float(v)).strip('"')
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_cell(x) for x in np.asarray(v).ravel().tolist())
    return str(v)


def write_jsonl(path, records: Iterable[Mapping], schema: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            if schema:
                rec = {"schema": SCHEMA, **rec}
            fh.write(dumps(rec) + "\n")
    return path


def write_csv(path, rows: Sequence[Mapping], fieldnames: Sequence[str] | None = None) -> Path:
    """CSV with vector cells joined by spaces."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for r in rows:
            w.writerow([_cell(r.get(k, "")) for k in fieldnames])
    return path

"""CSV and JSON persistence.

CSV floats are written with 17 significant digits (``%.17g``) so that every
value round-trips exactly; JSON uses Python's shortest round-trip repr, with
NaN and infinities mapped to null.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

PROFILE_COLUMNS = ("t", "xi", "u")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def jsonable(obj):
    """Plain-Python copy of obj: numpy scalars and arrays converted, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_csv(path: Path, columns, rows) -> Path:
    """rows: iterable of sequences (or dicts keyed by column)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            if isinstance(r, dict):
                r = [r.get(c) for c in columns]
            w.writerow([fmt(x) for x in r])
    return path


def profile_rows(times, xi, slices):
    """Row-major over (slice, node)."""
    slices = np.atleast_2d(slices)
    for t, row in zip(times, slices):
        for x, u in zip(xi, row):
            yield (float(t), float(x), float(u))


def write_profile(path: Path, times, xi, slices) -> Path:
    return write_csv(path, PROFILE_COLUMNS, profile_rows(times, xi, slices))


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]

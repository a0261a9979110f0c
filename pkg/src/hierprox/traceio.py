"""Trace CSV and JSON persistence.

Floats are written with 17 significant digits, so a CSV read back gives
bitwise-identical values.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .exceptions import InputError
from .solver import TRACE_COLUMNS, Trace

MAX_CSV_DIM = 16


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_trace_csv(trace: Trace, path) -> list:
    """Write the fixed columns plus ``x_i`` columns when iterates are recorded and n <= 16."""
    cols = list(TRACE_COLUMNS)
    X = trace.x if trace.x is not None and trace.x.shape[1] <= MAX_CSV_DIM else None
    if X is not None:
        cols += [f"x{i}" for i in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(len(trace)):
            row = [_fmt(getattr(trace, c)[i]) for c in TRACE_COLUMNS]
            if X is not None:
                row += [_fmt(v) for v in X[i]]
            w.writerow(row)
    return cols


def read_trace_csv(path, x0=None, status: str = "unknown") -> Trace:
    """Inverse of :func:`write_trace_csv`."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"trace {path} is empty")
    header = rows[0]
    if header[: len(TRACE_COLUMNS)] != list(TRACE_COLUMNS):
        raise InputError(f"trace {path}: unexpected header {header[:len(TRACE_COLUMNS)]}")
    try:
        data = [[float(v) for v in r] for r in rows[1:] if r]
    except ValueError as exc:
        raise InputError(f"trace {path}: {exc}") from None
    arr = np.array(data, dtype=np.float64).reshape(len(data), len(header))
    cols = {c: arr[:, i] for i, c in enumerate(TRACE_COLUMNS)}
    k = cols.pop("k").astype(np.int64)
    X = arr[:, len(TRACE_COLUMNS):] if len(header) > len(TRACE_COLUMNS) else None
    if X is not None and X.shape[1] == 0:
        X = None
    x_final = X[-1] if X is not None and len(X) else np.zeros(0)
    if x0 is None:
        x0 = X[0] if X is not None and len(X) else np.zeros(0)
    return Trace(k=k, **cols, status=status, x0=np.asarray(x0, dtype=np.float64), x_final=x_final,
                 last_k=int(k[-1]) if k.size else 0, x=X)


def json_safe(v):
    """Replace non-finite floats and numpy scalars so ``json.dump`` emits strict JSON."""
    if isinstance(v, dict):
        return {str(k): json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [json_safe(x) for x in v]
    if isinstance(v, np.ndarray):
        return json_safe(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(json_safe(obj), fh, indent=2)
        fh.write("\n")


def read_json(path, what="file"):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path} is not valid JSON: line {exc.lineno}: {exc.msg}") from None

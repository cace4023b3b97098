"""CSV instances and JSON reports.

Instance files have a header row; the response column (``y`` by default) may
sit anywhere and every other column is a regressor.  Floats are written with
``repr`` so that writing and re-reading is lossless.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import EmptyData, NonNumericCell, ParseError
from .linalg import Instance


def _resolve_column(header: list[str], response_col) -> int:
    if isinstance(response_col, int):
        idx = response_col
    elif response_col in header:
        return header.index(response_col)
    elif str(response_col).lstrip("-").isdigit():
        idx = int(response_col)
    else:
        raise ParseError(f"response column {response_col!r} not found in header", row=0)
    if not -len(header) <= idx < len(header):
        raise ParseError(f"response column index {idx} out of range for {len(header)} columns", row=0)
    return idx % len(header)


def read_table(path, response_col="y") -> tuple[list[str], np.ndarray, np.ndarray]:
    """Parse an instance CSV into (regressor names, y, A).

    Errors name the data row (1-based, header excluded) and the column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyData(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptyData(f"{path}: no data rows")
    if len(header) < 2:
        raise ParseError(f"{path}: need a response column and at least one regressor", row=0)
    ycol = _resolve_column(header, response_col)

    data = np.empty((len(body), len(header)))
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: expected {len(header)} cells, found {len(row)}", row=r)
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(f"{path}: non-numeric cell {cell!r}", row=r, column=header[c]) from None
            if not math.isfinite(v):
                raise NonNumericCell(f"{path}: non-finite cell {cell!r}", row=r, column=header[c])
            data[r - 1, c] = v
    keep = [c for c in range(len(header)) if c != ycol]
    return [header[c] for c in keep], data[:, ycol], data[:, keep]


def center(a: np.ndarray, y: np.ndarray, scale: bool = False):
    """Zero-mean columns and response; optionally unit-variance columns too."""
    a = a - a.mean(axis=0)
    y = y - y.mean()
    if scale:
        sd = a.std(axis=0)
        sd[sd == 0] = 1.0
        a = a / sd
    return a, y


def load_instance(path, standardize: bool = False, response_col="y", scale: bool = False) -> Instance:
    _, y, a = read_table(path, response_col)
    if standardize or scale:
        a, y = center(a, y, scale)
    return Instance(a, y)


def write_instance(path, instance: Instance, names=None, response_name: str = "y") -> None:
    names = list(names) if names is not None else [f"x{i}" for i in range(instance.n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([response_name] + names)
        for yv, row in zip(instance.y, instance.a):
            w.writerow([repr(float(yv))] + [repr(float(v)) for v in row])


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in row])


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, obj) -> None:
    """Deterministic JSON; non-finite floats become null."""
    Path(path).write_text(json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())

"""CSV ingestion and JSON report serialization."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .grouped import GroupedSample

__all__ = [
    "DBH_COLUMNS",
    "DataError",
    "dumps_report",
    "load_dbh",
    "load_dbh_pairs",
    "load_grouped",
    "load_sample",
    "to_jsonable",
]

# 1-based positions in the public DBH file: plot id, diameter (cm), height (m).
DBH_COLUMNS = {"plot": 1, "dbh": 10, "height": 11}
_MISSING = {"", "na", "nan", "null", "none"}
SIG_DIGITS = 10

Column = Union[int, str]


class DataError(ValueError):
    """Input file is missing, malformed, or has no usable rows."""


def _read_rows(path) -> tuple[Optional[list[str]], list[list[str]]]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {p}")
    with p.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{p}: file is empty")
    header = None
    if not _is_number(rows[0][0]) and rows[0][0].strip().lower() not in _MISSING:
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    return header, rows


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _col_index(col: Column, header, path) -> int:
    """0-based index of a 1-based position or a header name."""
    if isinstance(col, str) and not col.strip().isdigit():
        if header is None or col not in header:
            raise DataError(f"{path}: no column named {col!r}" + (f" (have {header})" if header else ""))
        return header.index(col)
    i = int(col)
    if i < 1:
        raise DataError(f"column positions are 1-based, got {i}")
    return i - 1


def _value(s: str, path, line) -> float:
    s = s.strip()
    if s.lower() in _MISSING:
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise DataError(f"{path}: line {line}: {s!r} is not a number") from None


def _field(row, idx, path, line) -> float:
    if idx >= len(row):
        raise DataError(f"{path}: line {line} has {len(row)} columns, need at least {idx + 1}")
    return _value(row[idx], path, line)


def _plot_rows(path, plot_id, plot_column):
    header, rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: no data rows")
    pi = _col_index(plot_column, header, path)
    first = 2 if header else 1
    sel = []
    for k, row in enumerate(rows):
        v = _field(row, pi, path, first + k)
        if v == plot_id:
            sel.append((first + k, row))
    if not sel:
        raise DataError(f"{path}: plot {plot_id} not found")
    return header, sel


def load_dbh(path, plot_id: int, column: Column = "dbh",
             plot_column: Column = DBH_COLUMNS["plot"]) -> np.ndarray:
    """Values of one plot from a DBH-layout CSV, missing entries dropped.

    ``column`` is ``"dbh"``, ``"height"``, a header name, or a 1-based
    position; file order is kept.
    """
    col = DBH_COLUMNS.get(column, column) if isinstance(column, str) else column
    header, sel = _plot_rows(path, plot_id, plot_column)
    ci = _col_index(col, header, path)
    x = np.array([_field(row, ci, path, ln) for ln, row in sel])
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise DataError(f"{path}: plot {plot_id} has no non-missing values in column {column!r}")
    return x


def load_dbh_pairs(path, plot_id: int, h_column: Column = "height", d_column: Column = "dbh",
                   plot_column: Column = DBH_COLUMNS["plot"]) -> tuple[np.ndarray, np.ndarray]:
    """Heights and diameters of trees with both measured, in file order."""
    hc = DBH_COLUMNS.get(h_column, h_column) if isinstance(h_column, str) else h_column
    dc = DBH_COLUMNS.get(d_column, d_column) if isinstance(d_column, str) else d_column
    header, sel = _plot_rows(path, plot_id, plot_column)
    hi, di = _col_index(hc, header, path), _col_index(dc, header, path)
    h = np.array([_field(row, hi, path, ln) for ln, row in sel])
    d = np.array([_field(row, di, path, ln) for ln, row in sel])
    keep = ~(np.isnan(h) | np.isnan(d))
    if not keep.any():
        raise DataError(f"{path}: plot {plot_id} has no trees with both height and diameter")
    return h[keep], d[keep]


def load_sample(path, column: Column = 1) -> np.ndarray:
    """One numeric column of a CSV (optional header), missing entries dropped."""
    header, rows = _read_rows(path)
    ci = _col_index(column, header, path)
    first = 2 if header else 1
    x = np.array([_field(r, ci, path, first + k) for k, r in enumerate(rows)])
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise DataError(f"{path}: no values in column {column!r}")
    return x


def load_grouped(path) -> GroupedSample:
    """Two-column table of boundaries and frequencies.

    Row ``i`` holds boundary ``r_i`` and the count of class ``(r_{i-1}, r_i]``;
    the first row's frequency is blank (or 0) because no class ends there.
    """
    header, rows = _read_rows(path)
    first = 2 if header else 1
    r, f = [], []
    for k, row in enumerate(rows):
        r.append(_field(row, 0, path, first + k))
        f.append(_field(row, 1, path, first + k) if len(row) > 1 else math.nan)
    if len(r) < 3:
        raise DataError(f"{path}: need at least 3 boundary rows for 2 classes")
    if not (math.isnan(f[0]) or f[0] == 0):
        raise DataError(f"{path}: first row starts the first class and must have a blank frequency")
    if any(math.isnan(v) for v in r) or any(math.isnan(v) for v in f[1:]):
        raise DataError(f"{path}: missing boundary or frequency")
    return GroupedSample(r, f[1:])


def _round_sig(v: float) -> Optional[float]:
    if not math.isfinite(v):
        return None
    return float(f"{v:.{SIG_DIGITS}g}")


def to_jsonable(obj):
    """Recursively convert numpy values and round floats to 10 significant digits."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round_sig(float(obj))
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, ensure_ascii=False) + "\n"

"""CSV input for observational analyses and plot-ready CSV output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ColumnMapping
from .core import DataError, Dataset


class MissingColumn(DataError):
    def __init__(self, column: str, path: str):
        super().__init__(f"column {column!r} not found in {path}")
        self.column = column


class UnparseableRow(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}: cannot parse {value!r} in column {column!r}")
        self.row = row
        self.column = column


class EmptyAfterFilter(DataError):
    pass


@dataclass(frozen=True, eq=False)
class LoadedData:
    data: Dataset
    n_dropped: int
    covariate_names: tuple


def _number(text: str, row: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise UnparseableRow(row, column, text) from None
    if not math.isfinite(v):
        raise UnparseableRow(row, column, text)
    return v


def load_analysis_csv(path: str | Path, columns: ColumnMapping, filters=(),
                      missing_values=("", "NA"), standardize: bool = False) -> LoadedData:
    """Read, filter and encode an analysis file.

    Rows with a missing value in any mapped or filtered column, or failing a
    filter, are dropped and counted.  Rows are numbered from 1 for the first
    data line.  Categorical columns are one-hot encoded against their declared
    reference level, with the remaining levels in sorted order.
    """
    path = str(path)
    missing = set(missing_values)
    numeric_cols = [columns.outcome, *columns.covariates]
    cat_cols = [c for c, _ in columns.categorical]
    filter_cols = [f.column for f in filters]
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for col in [columns.treatment, *numeric_cols, *cat_cols, *filter_cols]:
            if col not in header:
                raise MissingColumn(col, path)
        kept_y, kept_t, kept_x, kept_cat = [], [], [], []
        dropped = 0
        for row_no, row in enumerate(reader, 1):
            if None in row or any(v is None for v in row.values()):
                raise UnparseableRow(row_no, "<row>", "wrong number of fields")
            needed = set([columns.treatment, *numeric_cols, *cat_cols, *filter_cols])
            if any(row[c].strip() in missing for c in needed):
                dropped += 1
                continue
            t_raw = row[columns.treatment].strip()
            t = _number(t_raw, row_no, columns.treatment)
            if t not in (0.0, 1.0):
                raise UnparseableRow(row_no, columns.treatment, t_raw)
            values = {c: _number(row[c].strip(), row_no, c) for c in numeric_cols}
            ok = True
            for f in filters:
                v = values[f.column] if f.column in values else _number(
                    row[f.column].strip(), row_no, f.column)
                if not f.low <= v <= f.high:
                    ok = False
            if not ok:
                dropped += 1
                continue
            kept_y.append(values[columns.outcome])
            kept_t.append(int(t))
            kept_x.append([values[c] for c in columns.covariates])
            kept_cat.append([row[c].strip() for c in cat_cols])
    if not kept_y:
        raise EmptyAfterFilter(f"no rows left in {path} after filters and missing values")
    X = np.asarray(kept_x, dtype=float).reshape(len(kept_y), len(columns.covariates))
    if standardize and X.shape[1]:
        sd = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    names = list(columns.covariates)
    blocks = [X]
    for j, (col, ref) in enumerate(columns.categorical):
        levels = sorted({r[j] for r in kept_cat})
        if ref not in levels:
            raise DataError(f"reference level {ref!r} of {col!r} does not occur in the data")
        others = [lv for lv in levels if lv != ref]
        codes = np.array([r[j] for r in kept_cat])
        blocks.append(np.column_stack([codes == lv for lv in others]).astype(float)
                      if others else np.zeros((len(codes), 0)))
        names.extend(f"{col}={lv}" for lv in others)
    covariates = np.hstack(blocks)
    if covariates.shape[1] == 0:
        raise EmptyAfterFilter("no covariate columns remain after encoding")
    data = Dataset(np.asarray(kept_y), np.asarray(kept_t, dtype=np.int64), covariates)
    return LoadedData(data, dropped, tuple(names))


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"refusing to write non-finite value {v!r}")
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header, rows) -> None:
    """Comma-separated, LF line endings, floats in shortest round-trip form."""
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        lines.append(",".join(format_value(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))

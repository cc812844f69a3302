"""CSV input and output.

Data files carry one header row. The treatment column is named ``t`` or
``treatment`` and must be 0/1; the outcome column is ``y`` or ``outcome``;
every other column is a feature, kept in file order. Parse failures raise
:class:`CsvFormatError` naming the offending row and column. Floats are
written with ``repr`` so files round-trip bit for bit.
"""

from __future__ import annotations

import csv

import numpy as np

from .data import Dataset
from .exceptions import CsvFormatError

__all__ = [
    "load_dataset_csv",
    "load_features_csv",
    "save_dataset_csv",
    "save_predictions_csv",
    "save_table_csv",
]

_TREATMENT_NAMES = ("t", "treatment")
_OUTCOME_NAMES = ("y", "outcome")


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # tolerate trailing blank lines
    if not rows:
        raise CsvFormatError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CsvFormatError(f"{path}: duplicate column names in header")
    return header, rows[1:]


def _parse_cell(path, value, row_number, column):
    try:
        out = float(value)
    except ValueError:
        raise CsvFormatError(
            f"{path}: row {row_number}, column {column!r}: "
            f"could not parse {value!r} as a number"
        ) from None
    if not np.isfinite(out):
        raise CsvFormatError(
            f"{path}: row {row_number}, column {column!r}: "
            f"non-finite value {value!r}"
        )
    return out


def _parse_matrix(path, header, body):
    if not body:
        raise CsvFormatError(f"{path}: no data rows")
    X = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        # header is row 1, so data row i lives on file row i + 2
        rownum = i + 2
        if len(row) != len(header):
            raise CsvFormatError(
                f"{path}: row {rownum}: expected {len(header)} fields, "
                f"got {len(row)}"
            )
        for j, val in enumerate(row):
            X[i, j] = _parse_cell(path, val.strip(), rownum, header[j])
    return X


def _find_column(header, names):
    hits = [i for i, h in enumerate(header) if h.lower() in names]
    if len(hits) > 1:
        raise CsvFormatError(
            f"multiple columns match {'/'.join(names)}: "
            f"{[header[i] for i in hits]}"
        )
    return hits[0] if hits else None


def load_dataset_csv(path, treatment_column=None, outcome_column=None) -> Dataset:
    """Read a (features, treatment, outcome) data set.

    Column names default to t/treatment and y/outcome; pass explicit names
    to override the auto-detection.
    """
    header, body = _read_rows(path)
    if treatment_column is None:
        it = _find_column(header, _TREATMENT_NAMES)
        if it is None:
            raise CsvFormatError(f"{path}: no treatment column (t or treatment)")
    else:
        if treatment_column not in header:
            raise CsvFormatError(
                f"{path}: no column named {treatment_column!r}"
            )
        it = header.index(treatment_column)
    if outcome_column is None:
        iy = _find_column(header, _OUTCOME_NAMES)
        if iy is None:
            raise CsvFormatError(f"{path}: no outcome column (y or outcome)")
    else:
        if outcome_column not in header:
            raise CsvFormatError(f"{path}: no column named {outcome_column!r}")
        iy = header.index(outcome_column)
    if it == iy:
        raise CsvFormatError(
            f"{path}: treatment and outcome both map to column {header[it]!r}"
        )
    M = _parse_matrix(path, header, body)
    t_raw = M[:, it]
    if not np.all(np.isin(t_raw, (0.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(t_raw, (0.0, 1.0)))[0])
        raise CsvFormatError(
            f"{path}: row {bad + 2}, column {header[it]!r}: treatment must "
            f"be 0 or 1, got {t_raw[bad]!r}"
        )
    feat_cols = [j for j in range(len(header)) if j not in (it, iy)]
    if not feat_cols:
        raise CsvFormatError(f"{path}: no feature columns")
    return Dataset(
        covariates=M[:, feat_cols],
        treatment=t_raw.astype(int),
        outcome=M[:, iy],
        feature_names=tuple(header[j] for j in feat_cols),
    )


def load_features_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read covariates for prediction; treatment/outcome columns, if
    present, are dropped."""
    header, body = _read_rows(path)
    it = _find_column(header, _TREATMENT_NAMES)
    iy = _find_column(header, _OUTCOME_NAMES)
    M = _parse_matrix(path, header, body)
    feat_cols = [j for j in range(len(header)) if j not in (it, iy)]
    if not feat_cols:
        raise CsvFormatError(f"{path}: no feature columns")
    return M[:, feat_cols], tuple(header[j] for j in feat_cols)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def save_table_csv(path, fields, rows) -> None:
    """Write dict rows with a fixed field order and stable float text."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in fields])


def save_dataset_csv(path, X, treatment, outcome, extra=None) -> None:
    """Write x1..xp, t, y and optional extra named columns."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    names = [f"x{j + 1}" for j in range(p)] + ["t", "y"]
    cols = [X[:, j] for j in range(p)] + [np.asarray(treatment), np.asarray(outcome)]
    for name, col in (extra or {}).items():
        names.append(name)
        cols.append(np.asarray(col))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(c[i]) for c in cols])


def save_predictions_csv(path, values, column="tau_hat") -> None:
    values = np.asarray(values, dtype=float).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([column])
        for v in values:
            w.writerow([_fmt(v)])

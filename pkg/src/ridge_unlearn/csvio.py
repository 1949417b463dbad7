"""Plain numeric CSV reading and writing.

Format: comma separated, optional single header row, '.' decimal point, no
quoting of numbers.  Readers reject NaN/Inf and ragged rows with the file
name and line number in the message.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import DomainError


class CsvFormatError(DomainError):
    pass


def _parse_row(row, path, lineno):
    values = []
    for col, cell in enumerate(row):
        try:
            v = float(cell)
        except ValueError:
            raise CsvFormatError(
                f"{path}:{lineno}: column {col + 1}: not a number: {cell!r}"
            ) from None
        if not math.isfinite(v):
            raise CsvFormatError(f"{path}:{lineno}: column {col + 1}: non-finite value")
        values.append(v)
    return values


def _is_numeric(row):
    try:
        [float(c) for c in row]
        return True
    except ValueError:
        return False


def read_rows(path):
    """Return ``(header or None, list of (lineno, raw cells))``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(n, r) for n, r in enumerate(csv.reader(fh), start=1) if r]
    if not rows:
        raise CsvFormatError(f"{path}: file is empty")
    header = None
    if not _is_numeric(rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return header, rows


def read_matrix(path) -> np.ndarray:
    """Numeric matrix from a CSV file (header row skipped if present)."""
    header, rows = read_rows(path)
    width = len(header) if header is not None else len(rows[0][1])
    out = []
    for lineno, row in rows:
        if len(row) != width:
            raise CsvFormatError(
                f"{path}:{lineno}: expected {width} columns, found {len(row)}"
            )
        out.append(_parse_row(row, path, lineno))
    return np.array(out, dtype=float)


def read_labeled_groups(path, label_column: int = 0):
    """Split a CSV into two groups by a label column.

    Labels ``p``/``unlearned``/``0`` go to group P and ``q``/``retrained``/``1``
    to group Q.  A first row whose value cells are not numeric is a header.
    """
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [(n, r) for n, r in enumerate(csv.reader(fh), start=1) if r]
    if not rows:
        raise CsvFormatError(f"{path}: file is empty")

    def values(row):
        return row[:label_column] + row[label_column + 1 :]

    if not _is_numeric(values(rows[0][1])):
        rows = rows[1:]
    names = {"p": "p", "unlearned": "p", "0": "p", "q": "q", "retrained": "q", "1": "q"}
    groups = {"p": [], "q": []}
    width = None
    for lineno, row in rows:
        if len(row) <= label_column:
            raise CsvFormatError(f"{path}:{lineno}: missing label column")
        label = names.get(row[label_column].strip().lower().removesuffix(".0"))
        if label is None:
            raise CsvFormatError(
                f"{path}:{lineno}: unknown group label {row[label_column]!r}"
            )
        rest = values(row)
        if width is None:
            width = len(rest)
        elif len(rest) != width:
            raise CsvFormatError(
                f"{path}:{lineno}: expected {width} values, found {len(rest)}"
            )
        groups[label].append(_parse_row(rest, path, lineno))
    return np.array(groups["p"]), np.array(groups["q"])


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def write_matrix(path, matrix, header=None):
    write_rows(path, header, np.atleast_2d(np.asarray(matrix, dtype=float)).tolist())

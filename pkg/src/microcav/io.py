"""CSV / JSON ingestion and emission shared by the CLI and tests.

CSV conventions: comma-separated, optional ``#`` comment lines, optional
single header row (detected by non-numeric first field).  Malformed data
rows raise CsvFormatError naming the 1-based line number.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


class CsvFormatError(ValueError):
    """A CSV row failed to parse; the message names the line number."""


def read_columns(path: str | Path, n_min: int = 2, n_max: int | None = None) -> np.ndarray:
    """Numeric columns from a CSV file, shape (rows, columns).

    Accepts between ``n_min`` and ``n_max`` (default: n_min) columns; all
    data rows must have the same width.
    """
    if n_max is None:
        n_max = n_min
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            fields = [f.strip() for f in row if f.strip() != ""]
            if not fields:
                continue
            try:
                values = [float(f) for f in fields]
            except ValueError:
                if lineno == 1 or (lineno == 2 and not rows):
                    continue  # header row
                raise CsvFormatError(f"{path}: line {lineno}: non-numeric field in {fields!r}") from None
            if not n_min <= len(values) <= n_max:
                raise CsvFormatError(
                    f"{path}: line {lineno}: expected {n_min}"
                    + (f"..{n_max}" if n_max != n_min else "")
                    + f" columns, got {len(values)}"
                )
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CsvFormatError(f"{path}: line {lineno}: ragged row ({len(values)} vs {width} columns)")
            rows.append(values)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def sha256_of(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()

"""CSV ingestion and output. Headers are mandatory; floats are written with
17 significant digits so doubles round-trip exactly."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataIOError
from .mnw import PredictorPool, ResponseMatrix


def read_csv_matrix(path) -> tuple[np.ndarray, tuple[str, ...]]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataIOError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise DataIOError(f"{path}: missing header row")
        labels = tuple(h.strip() for h in header)
        if len(set(labels)) != len(labels):
            raise DataIOError(f"{path}: duplicate column names in header")
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(labels):
                raise DataIOError(
                    f"{path}, line {lineno}: expected {len(labels)} fields, got {len(row)}"
                )
            vals = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataIOError(
                        f"{path}, line {lineno}: cannot parse {cell.strip()!r} "
                        f"in column {col + 1} ({labels[col]})"
                    ) from None
                if not math.isfinite(v):
                    raise DataIOError(
                        f"{path}: non-finite value {cell.strip()!r} at row {len(rows) + 1}, "
                        f"column {col + 1} ({labels[col]})"
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataIOError(f"{path}: no data rows")
    return np.array(rows, dtype=float), labels


def ingest(y_path, z_path: Optional[str] = None) -> tuple[ResponseMatrix, PredictorPool]:
    """Read the response matrix and (optionally) the predictor pool."""
    y, y_labels = read_csv_matrix(y_path)
    Y = ResponseMatrix(y, y_labels)
    if z_path is None:
        return Y, PredictorPool.empty(Y.n)
    z, z_labels = read_csv_matrix(z_path)
    if z.shape[0] != y.shape[0]:
        raise DataIOError(
            f"row count mismatch: {y_path} has {y.shape[0]} rows, {z_path} has {z.shape[0]}"
        )
    return Y, PredictorPool(z, z_labels)


def format_float(x: float) -> str:
    return "%.17g" % x


def write_csv_matrix(path, values: np.ndarray, labels) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(labels)
            for row in np.asarray(values):
                w.writerow([format_float(v) for v in row])
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror}") from exc


def write_json(path, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror}") from exc


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror}") from exc

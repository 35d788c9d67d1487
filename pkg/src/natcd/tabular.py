"""Delimited-text ingestion and export of datasets."""
from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError
from .family import get_family
from .model import Dataset

__all__ = ["load", "write_csv", "ConstantColumnWarning"]


class ConstantColumnWarning(UserWarning):
    """A predictor is constant, so its coefficient is confounded with the intercept."""


def _parse(cell: str, row: int, name: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {name!r}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {name!r}: value {cell!r} is not finite")
    return value


def load(
    path,
    response_column: str = "y",
    delimiter: str = ",",
    family: Optional[str] = None,
    standardize: bool = False,
) -> Dataset:
    """Read a header-first delimited file into a :class:`Dataset`.

    Every column other than ``response_column`` is a predictor; the
    intercept column is added here and never read from the file. With
    ``standardize`` each predictor is divided by its (population) standard
    deviation and the divisors are kept in ``Dataset.column_scales``.

    Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if response_column not in header:
            raise DataError(f"{path}: no response column {response_column!r} in header {header}")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        r_idx = header.index(response_column)
        names = [h for k, h in enumerate(header) if k != r_idx]
        rows, ys = [], []
        for line_no, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}: row {line_no} has {len(cells)} fields, expected {len(header)}"
                )
            ys.append(_parse(cells[r_idx], line_no, response_column))
            rows.append([_parse(c, line_no, header[k]) for k, c in enumerate(cells) if k != r_idx])

    if len(ys) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(ys)}")
    y = np.array(ys)
    z = np.array(rows, dtype=float).reshape(len(ys), len(names))
    if family is not None:
        get_family(family).check_response(y)

    spread = z.std(axis=0) if z.size else np.zeros(0)
    for k in np.flatnonzero(spread == 0.0):
        warnings.warn(
            f"predictor {names[k]!r} is constant; its coefficient is confounded with the intercept",
            ConstantColumnWarning,
            stacklevel=2,
        )
    scales = None
    if standardize:
        col_scales = np.where(spread > 0.0, spread, 1.0)
        z = z / col_scales
        scales = np.concatenate([[1.0], col_scales])
    return Dataset.from_predictors(z, y, names=names, column_scales=scales)


def write_csv(dataset: Dataset, path, response_name: str = "y", delimiter: str = ",") -> None:
    """Write predictors (intercept excluded) and response so that :func:`load` round-trips.

    Values are written with ``repr`` and therefore read back bit-for-bit.
    """
    if dataset.column_names is not None:
        names = list(dataset.column_names[1:])
    else:
        names = [f"x{k}" for k in range(1, dataset.p)]
    if response_name in names:
        raise DataError(f"response name {response_name!r} clashes with a predictor name")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(names + [response_name])
        for row, yi in zip(dataset.x[:, 1:], dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(yi))])

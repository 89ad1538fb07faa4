"""Dataset ingestion: quarterly CSV with per-series transformations."""

from __future__ import annotations

import csv
import re

import numpy as np

from .model import Dataset

__all__ = ["TRANSFORMS", "load_dataset", "apply_transform", "write_dataset_csv"]

TRANSFORMS = ("log-difference", "level")

_DATE_RE = re.compile(r"^\d{4}:Q[1-4]$")


def apply_transform(x, code):
    """Apply one series transform; log-difference shortens by one."""
    x = np.asarray(x, dtype=float)
    if code == "level":
        return x
    if code == "log-difference":
        if np.any(x <= 0.0):
            raise ValueError("log-difference requires strictly positive raw values")
        return np.diff(np.log(x))
    raise ValueError(f"unknown transform {code!r}; choose from {TRANSFORMS}")


def load_dataset(path, variables=None, transforms=None, default_transform="log-difference"):
    """Read a quarterly CSV and apply per-series transforms.

    The file must have a header row; the first column holds dates in
    YYYY:Qn format, the remaining columns numeric series. Log-differenced
    series lose the first observation, so every series is aligned to the
    common sample starting at the second quarter.

    Parameters
    ----------
    path : str or Path
    variables : list of str, optional
        Column subset (default: all, in file order).
    transforms : dict, optional
        Per-variable overrides of `default_transform`.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty data file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ValueError("need a date column plus at least one series")
    body = rows[1:]
    width = len(header)
    dates = []
    raw = []
    for i, row in enumerate(body):
        if len(row) != width:
            raise ValueError(f"ragged row {i + 2}: expected {width} fields, got {len(row)}")
        d = row[0].strip()
        if not _DATE_RE.match(d):
            raise ValueError(f"unparseable date {d!r} in row {i + 2} (want YYYY:Qn)")
        dates.append(d)
        try:
            raw.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ValueError(f"non-numeric value in row {i + 2}: {exc}") from exc
    raw = np.asarray(raw)

    names = header[1:]
    if variables is None:
        variables = names
    missing = [v for v in variables if v not in names]
    if missing:
        raise ValueError(f"variables not in file: {missing}")
    transforms = dict(transforms or {})
    unknown = [v for v in transforms if v not in names]
    if unknown:
        raise ValueError(f"transform overrides for unknown variables: {unknown}")

    cols, codes = [], []
    for v in variables:
        code = transforms.get(v, default_transform)
        series = raw[:, names.index(v)]
        out = apply_transform(series, code)
        if code == "level":
            out = out[1:]  # align with the differenced series
        cols.append(out)
        codes.append(code)
    Y = np.column_stack(cols)
    return Dataset(Y, names=tuple(variables), dates=tuple(dates[1:]), transforms=tuple(codes))


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Write a transformed dataset back out (dates plus series columns)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + list(dataset.names))
        for t in range(dataset.T):
            w.writerow([dataset.dates[t]] + [f"{v:.17g}" for v in dataset.Y[t]])

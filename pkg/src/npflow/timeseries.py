"""Append-only CSV time series with schema checking.

Rows are formatted with %.17g so a rerun of the same computation appends
byte-identical lines.  Appending to a file whose header does not match the
expected schema raises SchemaError rather than silently mixing columns.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .diagnostics import InvariantReport, RadiusRecord
from .errors import SchemaError

RADIUS_COLUMNS = ("time", "tau_est", "tau_theory", "fit_r2", "gevrey_norm")

_NORM_ORDER = ("L2", "L4", "Linf", "H1", "Hm")


def invariant_columns(n_species: int) -> tuple[str, ...]:
    cols = ["time"]
    for prefix in ("mass", "min") + _NORM_ORDER:
        cols += [f"{prefix}_c{i + 1}" for i in range(n_species)]
    cols += ["dissipation", "mean_u_x", "mean_u_y",
             "force_mean_x", "force_mean_y"]
    return tuple(cols)


def invariant_row(report: InvariantReport) -> tuple[float, ...]:
    row = [report.time]
    row += list(report.mass)
    row += list(report.min_c)
    for kind in _NORM_ORDER:
        row += [report.norms[f"c{i + 1}"][kind]
                for i in range(len(report.mass))]
    row += [report.dissipation, report.mean_velocity[0],
            report.mean_velocity[1], report.force_mean[0],
            report.force_mean[1]]
    return tuple(row)


def radius_row(record: RadiusRecord) -> tuple[float, ...]:
    return (record.time, record.tau_estimated, record.tau_theory,
            record.fit_quality, record.gevrey_norm_at_tau)


def _format(value: float) -> str:
    return "%.17g" % float(value)


def append_row(path: str | Path, columns: tuple[str, ...],
               row: tuple[float, ...]) -> None:
    """Append one row, creating the file (with header) on first use."""
    if len(row) != len(columns):
        raise SchemaError(f"row has {len(row)} values for {len(columns)} columns")
    path = Path(path)
    header = ",".join(columns)
    if path.exists():
        with path.open("r", newline="") as fh:
            first = fh.readline().rstrip("\r\n")
        if first != header:
            raise SchemaError(
                f"{path}: existing header does not match; expected "
                f"{header!r}, found {first!r}")
        mode = "a"
    else:
        mode = "w"
    with path.open(mode, newline="") as fh:
        if mode == "w":
            fh.write(header + "\n")
        fh.write(",".join(_format(v) for v in row) + "\n")


def append_invariants(path: str | Path, report: InvariantReport) -> None:
    append_row(path, invariant_columns(len(report.mass)),
               invariant_row(report))


def append_radius(path: str | Path, record: RadiusRecord) -> None:
    append_row(path, RADIUS_COLUMNS, radius_row(record))


def read_table(path: str | Path) -> dict[str, np.ndarray]:
    """Load a CSV written by append_row as {column: float array}."""
    path = Path(path)
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty table") from None
        rows = [[float(v) for v in row] for row in reader if row]
    if rows and any(len(r) != len(columns) for r in rows):
        raise SchemaError(f"{path}: ragged rows")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    return {name: data[:, j] for j, name in enumerate(columns)}

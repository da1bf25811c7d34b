"""Readers for the documented CSV artifacts of a solver run.

Three formats are understood, all plain CSV with a fixed header row and
%.17g floats (so parsing recovers the original doubles exactly):

* radius series:     time, tau_est, tau_theory, fit_r2, gevrey_norm
* invariants series: time, then per-species mass/min/L2/L4/Linf/H1/Hm
                     column groups, then dissipation, mean_u_x, mean_u_y,
                     force_mean_x, force_mean_y
* shell spectrum:    field, shell, k_at_max, amplitude   (one block per
                     field plus a "combined" block of shell-wise maxima)
"""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .errors import EmptySeriesError, SchemaMismatchError

RADIUS_COLUMNS = ("time", "tau_est", "tau_theory", "fit_r2", "gevrey_norm")
SPECTRUM_COLUMNS = ("field", "shell", "k_at_max", "amplitude")

# invariants headers vary with the species count; these must always appear
_INVARIANT_TAIL = ("dissipation", "mean_u_x", "mean_u_y",
                   "force_mean_x", "force_mean_y")
_MASS_RE = re.compile(r"mass_c\d+$")


def _read_rows(path: Path | str) -> tuple[tuple[str, ...], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatchError(f"{path}: empty file where a CSV header "
                                  "was expected")
    header = tuple(rows[0])
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaMismatchError(
                f"{path}: row {i} has {len(row)} fields, header has "
                f"{len(header)}")
    return header, rows[1:]


def _to_columns(header, body) -> dict[str, np.ndarray]:
    return {name: np.array([float(row[j]) for row in body], dtype=float)
            for j, name in enumerate(header)}


def read_radius(path: Path | str) -> dict[str, np.ndarray]:
    """Radius time series as a column dict; schema checked exactly."""
    header, body = _read_rows(path)
    if header != RADIUS_COLUMNS:
        raise SchemaMismatchError(
            f"{path}: header {header} is not the radius schema "
            f"{RADIUS_COLUMNS}")
    if not body:
        raise EmptySeriesError(f"{path}: radius series has no rows")
    return _to_columns(header, body)


def read_invariants(path: Path | str) -> tuple[tuple[str, ...],
                                               dict[str, np.ndarray]]:
    """Invariants series; returns (header, columns) since the header is
    species-count dependent."""
    header, body = _read_rows(path)
    if not header or header[0] != "time":
        raise SchemaMismatchError(
            f"{path}: invariants series must start with a 'time' column, "
            f"got {header[:1]}")
    if not any(_MASS_RE.fullmatch(name) for name in header):
        raise SchemaMismatchError(
            f"{path}: no mass_c* column; not an invariants series")
    missing = [name for name in _INVARIANT_TAIL if name not in header]
    if missing:
        raise SchemaMismatchError(
            f"{path}: invariants series is missing columns {missing}")
    if not body:
        raise EmptySeriesError(f"{path}: invariants series has no rows")
    return header, _to_columns(header, body)


def read_spectrum(path: Path | str) -> dict[str, dict[str, np.ndarray]]:
    """Shell-spectrum dump grouped by field name.

    Each value holds ``shell`` (int), ``k_at_max`` and ``amplitude``
    arrays in file order.
    """
    header, body = _read_rows(path)
    if header != SPECTRUM_COLUMNS:
        raise SchemaMismatchError(
            f"{path}: header {header} is not the spectrum schema "
            f"{SPECTRUM_COLUMNS}")
    if not body:
        raise EmptySeriesError(f"{path}: spectrum dump has no rows")
    fields: dict[str, dict[str, list]] = {}
    for row in body:
        blk = fields.setdefault(row[0], {"shell": [], "k_at_max": [],
                                         "amplitude": []})
        blk["shell"].append(int(row[1]))
        blk["k_at_max"].append(float(row[2]))
        blk["amplitude"].append(float(row[3]))
    return {name: {"shell": np.array(blk["shell"], dtype=int),
                   "k_at_max": np.array(blk["k_at_max"], dtype=float),
                   "amplitude": np.array(blk["amplitude"], dtype=float)}
            for name, blk in fields.items()}

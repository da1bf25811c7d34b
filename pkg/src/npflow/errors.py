"""Exception taxonomy shared across the package.

Every error raised on a documented failure path derives from NpflowError so
the CLI can map them onto its exit codes (validation 1, divergence 2, I/O 3).
"""

from __future__ import annotations


class NpflowError(Exception):
    """Base class for all package errors."""


class ConfigError(NpflowError):
    """Invalid configuration or argument values.

    ``key_path`` names the offending config entry (e.g. ``species[0].D``)
    when the error originates from a config document.
    """

    def __init__(self, message: str, key_path: str | None = None):
        self.key_path = key_path
        if key_path is not None:
            message = f"{key_path}: {message}"
        super().__init__(message)


class DomainError(NpflowError):
    """Operator applied outside its mathematical domain."""


class GevreyOverflowError(NpflowError):
    """exp(tau*|k|^s) would overflow for some lattice mode."""

    def __init__(self, message: str, mode: tuple[int, int]):
        self.mode = mode
        super().__init__(message)


class StaleStateError(NpflowError):
    """Derived fields (rho, phi, u) were requested but not built."""


class ModelUsageError(NpflowError):
    """Operation does not apply to the state's fluid model."""


class DivergenceError(NpflowError):
    """NaN/Inf appeared in the solution coefficients."""

    def __init__(self, message: str, step_index: int):
        self.step_index = step_index
        super().__init__(f"{message} (step {step_index})")


class InsufficientShellsError(NpflowError):
    """Too few usable spectral shells for a radius fit."""


class TimeGridError(NpflowError):
    """Time samples not strictly increasing."""


class SnapshotError(NpflowError):
    """Snapshot file unreadable, truncated, corrupt, or wrong version."""


class SchemaError(NpflowError):
    """Time-series file header does not match the expected schema."""

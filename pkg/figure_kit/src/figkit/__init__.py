"""Batch figure rendering for solver run artifacts.

Consumes only the documented on-disk formats (invariants/radius CSV
series and shell-spectrum dumps); it never imports the solver."""

from .errors import EmptySeriesError, FigkitError, SchemaMismatchError
from .figures import (DEFAULT_NOISE_FLOOR, KINDS, FigureSpec, RenderResult,
                      deficit_spans, fit_decay, render)
from .tables import (RADIUS_COLUMNS, SPECTRUM_COLUMNS, read_invariants,
                     read_radius, read_spectrum)

__version__ = "0.1.0"

"""Error types raised while reading run artifacts or rendering figures."""


class FigkitError(Exception):
    """Base class for all figure-kit failures."""


class SchemaMismatchError(FigkitError):
    """An input file does not match the documented schema for the kind."""


class EmptySeriesError(FigkitError):
    """The inputs parsed fine but contain nothing plottable."""

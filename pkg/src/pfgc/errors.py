"""Exception hierarchy.

The CLI maps :class:`DataError` subclasses to exit code 1 and
:class:`ConfigError` subclasses to exit code 2.
"""


class PFGCError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class DataError(PFGCError):
    """Input data is malformed (non-finite features, bad labels, ...)."""

    kind = "data"


class LoadError(DataError):
    """A dataset file is missing or unreadable."""

    kind = "load"


class ShapeError(DataError):
    """Array dimensions are inconsistent."""

    kind = "shape"


class NumericalError(DataError):
    """A numerical routine failed (non-convergence, NaN, divergence)."""

    kind = "numerical"


class ConfigError(PFGCError):
    """A configuration value is out of its valid range."""

    kind = "config"


class UsageError(ConfigError):
    """An operation was called without its preconditions (e.g. no labels)."""

    kind = "usage"

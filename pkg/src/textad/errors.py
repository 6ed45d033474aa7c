"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
(formats, shapes, metric preconditions) exit 2, numeric failures exit 3.
"""


class TextadError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatchError(TextadError, ValueError):
    """Operands have incompatible shapes; the message names both."""


class DataFormatError(TextadError, ValueError):
    """A file (archive, manifest, checkpoint, config) is malformed."""


class ConfigError(TextadError, ValueError):
    """A configuration value violates its documented constraints."""


class MetricUndefinedError(TextadError, ValueError):
    """The requested metric is undefined for the given label mix."""


class NumericError(TextadError, ArithmeticError):
    """A computation produced non-finite values; the message names the stage."""


class DegeneratePriorError(NumericError):
    """Reference draws collapsed to zero spread; z-scores are undefined."""

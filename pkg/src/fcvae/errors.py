"""Exception types shared across the package.

Each maps to a CLI exit code: ConfigError -> 1, DataError and
ParseError -> 2, NumericError -> 3. Anything else is a bug.
"""


class FCVAEError(Exception):
    """Base class for package errors."""


class ConfigError(FCVAEError):
    """Invalid configuration value or inconsistent option combination."""


class DataError(FCVAEError):
    """Input data violates a structural requirement (after parsing)."""


class ParseError(FCVAEError):
    """A file could not be parsed; message names file and line."""


class NumericError(FCVAEError):
    """A numeric invariant broke at runtime (non-finite loss, bad sigma)."""


class ShapeError(FCVAEError):
    """Array shapes do not conform for the requested operation."""

"""Exception hierarchy.

Every error carries the CLI exit code it maps to so the command layer can
translate failures without a lookup table.
"""

from __future__ import annotations


class LlipError(Exception):
    exit_code = 2


class UsageError(LlipError):
    exit_code = 1


class GeometryError(LlipError, ValueError):
    """Block dimensions or placement outside the legal range."""


class CoordinateError(GeometryError):
    """Pixel coordinate outside its block."""


class InputError(LlipError, ValueError):
    """Vector arity or scheme mismatch, empty batches."""


class NumericError(LlipError, ArithmeticError):
    exit_code = 3


class FormatError(LlipError):
    """Raw video or dataset contents do not match the declared layout."""


class ParseError(FormatError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFileError(ParseError):
    """Base for model-file parse failures; `field` names the bad header field."""


class MagicError(ModelFileError):
    pass


class VersionError(ModelFileError):
    pass


class DimensionsError(ModelFileError):
    pass


class LengthError(ModelFileError):
    pass


class ConfigurationError(LlipError):
    pass


class TruncationError(ModelFileError):
    pass

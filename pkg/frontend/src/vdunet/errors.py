"""Exception taxonomy, aligned with the CLI exit-code contract."""

from __future__ import annotations

__all__ = [
    "VdunetError",
    "ParameterError",
    "DimensionError",
    "FormatError",
    "TruncationError",
    "NumericalError",
]


class VdunetError(Exception):
    """Base class for everything this package raises on purpose."""


class ParameterError(VdunetError, ValueError):
    """A value is outside its documented domain. CLI exit code 2."""


class DimensionError(VdunetError, ValueError):
    """Array shapes are inconsistent with each other. CLI exit code 4."""


class FormatError(VdunetError, ValueError):
    """A file is not a well-formed GSC1/GSM1/GSD1 blob. CLI exit code 3."""


class TruncationError(FormatError):
    """The file ended before its header said it would."""


class NumericalError(VdunetError, ArithmeticError):
    """Training or checking hit a non-finite value. CLI exit code 5."""

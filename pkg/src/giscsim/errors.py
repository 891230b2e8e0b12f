"""Exception taxonomy shared across the toolkit.

Every error raised by the library derives from GiscError so callers (and
the CLI exit-code mapping) can distinguish failure classes without string
matching.
"""


class GiscError(Exception):
    """Base class for all giscsim errors."""


class ParameterError(GiscError, ValueError):
    """A scalar parameter is out of its documented domain (NaN SNR, peak <= 0, ...)."""


class DimensionError(GiscError, ValueError):
    """Shapes, sizes or indices are inconsistent or out of range."""


class SelectionError(GiscError, ValueError):
    """A selection (e.g. a wavelength range) matched nothing."""


class CapacityError(GiscError):
    """The requested object exceeds the documented memory budget."""


class FormatError(GiscError):
    """A file does not conform to one of the binary formats."""


class TruncationError(FormatError):
    """A file's payload length disagrees with its header."""


class DegenerateMatrixError(GiscError):
    """A sensing matrix is numerically unusable (zero rows/columns)."""


class DivergenceError(GiscError):
    """An iterative solver produced a non-finite iterate."""

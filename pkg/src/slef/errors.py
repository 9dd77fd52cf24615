"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
data problems (bad files, invalid arguments, too few points) and numerical
degeneracies (collapsed ellipses, singular normal equations).
"""


class SlefError(Exception):
    """Base class for every error raised by this package."""


class DataError(SlefError, ValueError):
    """Input data is malformed or violates a precondition."""


class InvariantError(DataError):
    """A field would contain NaN/Inf or has inconsistent dimensions."""


class DomainError(DataError):
    """A scalar argument lies outside its admissible interval."""


class SizeError(DataError):
    """Dimensions are too small, too large or inconsistent."""


class ParseError(DataError):
    """A file could not be decoded.

    Parameters
    ----------
    message : str
        Human readable diagnostic.
    offset : int, optional
        Byte offset in the file where decoding failed.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class InsufficientDataError(DataError):
    """Fewer points than a fit needs."""


class NumericalError(SlefError, ArithmeticError):
    """Base class for numerical degeneracies."""


class DegenerateCloudError(NumericalError):
    """The Lissajous cloud collapsed (normal matrix singular or ill-conditioned)."""


class DegenerateFitError(NumericalError):
    """Fitted conic coefficients do not describe an ellipse."""


class RobustCollapseError(NumericalError):
    """All robust weights vanished; a larger kappa is needed."""


class DegenerateResponseError(NumericalError):
    """Filter-bank response is identically zero."""

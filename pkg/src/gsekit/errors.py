"""Exception types shared across the package."""


class GsekitError(Exception):
    """Base class for every error raised by gsekit."""


class DataError(GsekitError, ValueError):
    """Invalid input data: malformed files, inconsistent shapes, out-of-range values."""


class ConvergenceError(GsekitError, RuntimeError):
    """An iterative routine failed to converge within its iteration budget."""


class GuardError(GsekitError, ValueError):
    """A cost or overflow guard refused the requested computation."""


class NonConvergenceWarning(UserWarning):
    """An iterative routine hit its iteration cap; the result may be inexact."""

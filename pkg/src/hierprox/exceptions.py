"""Exception hierarchy shared by every hierprox module."""


class HierProxError(Exception):
    """Base class for all library errors."""


class InputError(HierProxError, ValueError):
    """Malformed input: wrong dimension, non-finite entries, bad index."""


class ParameterError(HierProxError, ValueError):
    """A step size or constant lies outside its admissible interval."""


class ScheduleError(HierProxError, ValueError):
    """A step-size schedule cannot produce valid weights at some index."""


class OracleUnsupported(HierProxError):
    """The exact oracle cannot handle this problem (non-quadratic, nonsmooth, ...)."""


class UnboundedError(HierProxError):
    """A quadratic level is unbounded below on its feasible affine set."""


class FitError(HierProxError, ValueError):
    """A rate fit has too few usable points."""


class DivergedError(HierProxError):
    """An iterate became non-finite; carries the last finite iterate."""

    def __init__(self, message, last_finite=None):
        super().__init__(message)
        self.last_finite = last_finite

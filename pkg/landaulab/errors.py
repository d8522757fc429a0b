"""
Error handling.
"""


class LabError(Exception):
    """Base exception class for errors within landaulab.
    """
    pass


class ParameterError(LabError, ValueError):
    """A physical or numerical parameter is outside its admissible range."""
    pass


class GridError(LabError):
    """Invalid grid, or spectra living on different grids/frames."""
    pass


class AlignmentError(GridError):
    """A time or frequency does not land on the (k, eta) lattice."""
    pass


class SubcriticalExponentError(ParameterError):
    """The radius schedule exponent a is not positive, i.e. s <= 1/(2+gamma)."""
    pass


class QuadratureError(LabError):
    """A quadrature did not converge within its limits."""
    pass


class InadmissibleRadius(LabError):
    """The localization sum of the background diverges for the requested radius."""
    pass


class InstabilityError(LabError):
    """Refusal to compute a quantity that requires a decaying (stable) run."""
    pass


class _StateError(LabError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


class ResolutionAlarm(_StateError):
    """Velocity resolution exhausted or weights capped.

    The last good simulation state, if any, is available as ``state``.
    """
    pass


class NumericalFailure(_StateError):
    """NaN or Inf encountered.  ``state`` holds the last finite state."""
    pass

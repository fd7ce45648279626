"""Exception types raised by the solvers and file readers."""


class CryoCavityError(Exception):
    """Base class for all library errors."""


class NumericalFailure(CryoCavityError):
    """A solver could not produce a trustworthy result."""


class NoInversion(CryoCavityError):
    """The resonance slope does not change sign inside the valid range."""


class OutOfTable(CryoCavityError):
    """A temperature lies outside a tabulated material property."""


class GridTooCoarse(NumericalFailure):
    """The intensity grid cannot resolve the turning points of a branch."""


class Degenerate(NumericalFailure):
    """Two turning points coincide within the solver resolution."""


class StiffnessFailure(NumericalFailure):
    """The adaptive integrator step size collapsed."""


class IllConditioned(NumericalFailure):
    """A least-squares system is too badly conditioned to trust."""


class InsufficientData(CryoCavityError):
    """Too few calibration points for the requested polynomial degree."""

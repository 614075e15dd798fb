"""Exception types raised by the numerical routines."""


class MFDuffingError(Exception):
    """Base class; the CLI prints the concrete class name on failure."""


class QuadratureFailure(MFDuffingError):
    pass


class ConvergenceFailure(MFDuffingError):
    pass


class BracketFailure(MFDuffingError):
    pass


class InsufficientMoments(MFDuffingError):
    pass


class SingularBlock(MFDuffingError):
    pass


class ShortWindow(MFDuffingError):
    pass


class Divergence(MFDuffingError):
    pass


class EmptyBinsWarning(RuntimeWarning):
    pass

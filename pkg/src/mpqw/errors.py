"""Exception types raised across the package."""


class MPQWError(Exception):
    """Base class for all package errors."""


class SingularAtMomentum(MPQWError):
    """Scattering linear system is numerically singular at the requested momentum."""

    def __init__(self, k, condition):
        self.k = k
        self.condition = condition
        super().__init__(f"linear system singular at k={k!r} (condition number {condition:.3e})")


class DimensionTooLarge(MPQWError):
    def __init__(self, dimension, cap):
        self.dimension = dimension
        self.cap = cap
        super().__init__(f"basis dimension {dimension} exceeds cap {cap}")


class ToleranceUnachievable(MPQWError):
    pass


class ZeroState(MPQWError):
    pass


class SupportOutOfRange(MPQWError):
    pass


class GeometryMismatch(MPQWError):
    pass


class PhaseNotRealizable(MPQWError):
    pass


class NotFound(MPQWError):
    pass


class TooManyQubits(MPQWError):
    pass


class DegenerateSystem(MPQWError):
    pass


class InvalidMomentum(MPQWError):
    pass


class GadgetError(MPQWError):
    """Unknown gadget name, bad parameters, or arity mismatch."""


class PlanError(MPQWError):
    """Inconsistent circuit or block plan."""

"""Exception hierarchy shared by all boxmom modules."""


class BoxmomError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(BoxmomError, ValueError):
    """Input violates a self-adjointness or well-formedness requirement."""


class GeometryError(BoxmomError, ValueError):
    """Malformed or degenerate region."""


class DomainError(BoxmomError, ValueError):
    """Operation applied outside its domain (wrong sector, wrong support)."""


class NumericalError(BoxmomError, RuntimeError):
    """A numerical invariant failed; ``invariant`` names it."""

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant


class ResolutionError(NumericalError):
    """Grid too coarse for the requested stencil."""


class ConsistencyError(NumericalError):
    """Two independent routes to the same quantity disagree."""

"""Exception types shared across the package."""


class ReebcutError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ReebcutError):
    """A grid, ladder or settings object is unusable (too coarse, out of range)."""


class PreconditionError(ReebcutError):
    """An operation was called outside its documented domain."""


class EvaluationError(ReebcutError):
    """A value/derivative oracle failed; carries the evaluation location."""

    def __init__(self, message, s=None, point=None):
        super().__init__(message)
        self.s = s
        self.point = point


class IntegrationError(ReebcutError):
    """An ODE solve did not finish; carries the last valid state."""

    def __init__(self, message, last_s=None, last_state=None):
        super().__init__(message)
        self.last_s = last_s
        self.last_state = last_state


class DegenerateOrbitError(ReebcutError):
    """Rotation number too close to an integer for a stable index window."""


class NonEllipticOrbitError(ReebcutError):
    """Linearized return map is hyperbolic; no rotation number exists."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class ResolutionError(ReebcutError):
    """Quadrature resolution insufficient for the requested geometry."""


class InconclusiveError(ReebcutError):
    """A rounded integer result is too far from the raw value to trust."""


class ValidationError(ReebcutError):
    """A run configuration failed strict schema validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

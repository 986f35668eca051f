"""Exception hierarchy shared by every module."""


class PolystrandError(Exception):
    """Base class for all package errors."""


class InvalidInput(PolystrandError, ValueError):
    """An argument violates a documented structural requirement."""


class NearCutLocus(PolystrandError, ValueError):
    """Rotation angle too close to pi for a well-defined logarithm."""


class OrientationFlip(PolystrandError, ValueError):
    """Matrix has non-positive determinant and cannot be projected to SO(3)."""


class ChartDomain(PolystrandError, ValueError):
    """A coordinate chart was evaluated outside its domain."""


class PreconditionError(PolystrandError, ValueError):
    """An operation was called outside its stated precondition."""


class BlowUp(PolystrandError, FloatingPointError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(PolystrandError, ValueError):
    """A run configuration could not be parsed or is malformed."""


class ValidationError(PolystrandError, ValueError):
    """A parsed run configuration violates a physical or numerical invariant."""

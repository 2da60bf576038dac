"""Exception types shared across the library."""


class AdrflatError(Exception):
    """Base class for all library errors."""


class NotControllable(AdrflatError):
    """Controllability matrix is rank deficient; canonical form is undefined."""


class NotHurwitz(AdrflatError):
    """A matrix expected to be Hurwitz has an eigenvalue with Re >= 0."""


class DimensionMismatch(AdrflatError):
    """Vector/matrix dimensions are inconsistent with the model."""


class InsufficientDerivatives(AdrflatError):
    """A derivative stack is too short for the requested polynomial order."""


class UnsupportedDimension(AdrflatError):
    """Operation only implemented for a specific dimension (e.g. 2x1 annihilator)."""


class SingularChannel(AdrflatError):
    """A pivot polynomial needed by the flat parameterization is identically zero."""


class QTooSmall(AdrflatError):
    """Ultimate-bound certificate requires lambda_min(Q) > 1."""


class EmptyWindow(AdrflatError):
    """Requested metric window contains no samples."""


class UnstableRun(AdrflatError):
    """Simulation aborted because a state magnitude exceeded the blow-up guard."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class StepTooLarge(AdrflatError):
    """Integration step violates the observer-bandwidth stability guard."""


class ScenarioError(AdrflatError):
    """Scenario file is malformed: syntax error, unknown key, or bad value."""

"""Exception types shared across the package."""

from __future__ import annotations


class GbmStopError(Exception):
    """Base class for all package errors."""


class IllPosedParameterError(GbmStopError, ValueError):
    """Model parameters violate well-posedness (discriminant, sigma > 0, ...)."""


class UnsupportedShapeError(GbmStopError, ValueError):
    """Profit function sign pattern is outside the supported family."""


class BadParametersError(GbmStopError, ValueError):
    """Constructor arguments violate a documented precondition."""


class DivergentIntegralError(GbmStopError, ArithmeticError):
    """A weighted profit integral diverges; carries the sign of the divergence.

    sign is +1 or -1: the integral is +inf or -inf.  Raised only when the
    divergence is decided analytically from tail exponents, never from
    quadrature running out of subdivisions.
    """

    def __init__(self, sign: int, message: str = ""):
        self.sign = int(sign)
        super().__init__(message or f"integral diverges to {'+' if sign > 0 else '-'}inf")


class NoConvergenceError(GbmStopError, ArithmeticError):
    """Quadrature or root-finding failed to reach the requested tolerance."""


class NotIntegrableError(GbmStopError, ArithmeticError):
    """The particular solution does not exist (a defining integral is infinite)."""


class NotApplicableError(GbmStopError, ValueError):
    """The requested analysis has no formula for this problem class."""


class BracketFailureError(GbmStopError, ArithmeticError):
    """A threshold equation could not be bracketed.

    Signals misclassification or an untrustworthy residual; the message
    carries which equation failed and the residuals seen at the bracket
    candidates.
    """


class TruncationDominatesError(GbmStopError, ArithmeticError):
    """Monte Carlo horizon truncation bias exceeds the statistical error."""


class DominanceViolatedError(GbmStopError, RuntimeError):
    """A perturbed policy beat the solved policy beyond statistical noise."""


class VerificationError(GbmStopError, RuntimeError):
    """A posteriori solution check failed (HJB residual, sign test, ...)."""

"""Exception hierarchy shared by all modules."""


class CurvBVPError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(CurvBVPError, ValueError):
    """A sequence family or option received a nonsensical parameter."""


class DomainError(CurvBVPError, ValueError):
    """A value left the domain an operation requires (e.g. a factor 1 + q <= 0)."""


class NonPositiveCoefficientError(DomainError):
    """A coefficient that must be positive was found to be <= 0."""


class OverflowFlag(CurvBVPError, ArithmeticError):
    """A forward recurrence left the floating-point range."""


class OscillationError(CurvBVPError):
    """A generalized zero was witnessed where a nonoscillatory solution is required."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NoStabilizationError(CurvBVPError):
    """Horizon doubling hit its cap before values stabilized."""


class HypothesisViolatedError(CurvBVPError):
    """A summability hypothesis failed its numerical test."""


class UnstableFitError(CurvBVPError):
    """An asymptotic ratio did not plateau within the allowed spread."""


class PreconditionError(CurvBVPError, ValueError):
    """The caller-asserted precondition of an operation does not hold."""


class CannotCertifyError(CurvBVPError):
    """No certification strategy produced a valid positivity witness."""


class NoConvergenceError(CurvBVPError):
    """Fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message: str, log: list | None = None):
        super().__init__(message)
        self.log = log or []


class ExpressionError(InvalidParameterError):
    """A custom coefficient expression is outside the supported grammar."""


class UnboundedRatioError(HypothesisViolatedError):
    """``F(u)/u`` grows without a plateau as ``u -> 0+``."""

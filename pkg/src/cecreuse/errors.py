"""Exception types shared across the solver modules."""


class CecReuseError(Exception):
    """Base class for all package-specific errors."""


class MalformedInput(CecReuseError):
    """Input violates a structural precondition (shapes, binary flags, keys)."""


class DimensionMismatch(MalformedInput):
    """Array or container dimensions do not agree with the scenario."""


class StabilityViolation(CecReuseError):
    """A queue is driven at or beyond its service rate."""


class Infeasible(CecReuseError):
    """No feasible decision exists (or none was found by the repair steps)."""


class BracketError(CecReuseError):
    """Root bracketing precondition failed for a scalar bisection."""


class DegenerateInput(CecReuseError):
    """A ratio or bound is undefined for this input (zero denominator)."""


class TooLarge(CecReuseError):
    """Instance exceeds the size limit of an exhaustive-enumeration oracle."""


class UnstableConfig(CecReuseError):
    """Simulated queue parameters violate the stability condition."""


class LineSearchExhausted(CecReuseError):
    """Backtracking hit the backtrack limit without an acceptable step."""

    def __init__(self, message, tried=None):
        super().__init__(message)
        self.tried = tried


class EmptyVector(CecReuseError):
    """Simplex projection of a zero-length vector is undefined."""

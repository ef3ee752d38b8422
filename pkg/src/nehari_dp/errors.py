"""Exception types raised across the package."""


class NehariError(Exception):
    """Base class for all package errors."""


class BadSize(NehariError, ValueError):
    """Mesh size too small to carry an interior degree of freedom."""


class NonFinite(NehariError, ArithmeticError):
    """A modular or norm evaluation overflowed."""


class DegenerateDirection(NehariError):
    """No Nehari projection exists along the given ray."""


class MaxIters(NehariError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LambdaTooLarge(NehariError):
    """Every probe direction is degenerate at the requested parameter."""


class NotSplit(NehariError):
    """The two branch energies do not straddle zero."""

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = reports


class NoBracket(NehariError):
    """Threshold search could not find a feasible starting parameter."""


class ConfigError(NehariError, ValueError):
    """Malformed configuration text."""


class HypothesisViolation(ConfigError):
    """A structural hypothesis on exponents or coefficients fails.

    ``constraint`` holds the violated inequality in readable form.
    """

    def __init__(self, constraint, detail=""):
        msg = f"{constraint} violated"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.constraint = constraint

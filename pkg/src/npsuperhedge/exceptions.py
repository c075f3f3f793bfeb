"""Exception hierarchy for the package."""

from __future__ import annotations


class SuperhedgeError(Exception):
    """Base class for all errors raised by npsuperhedge."""


class QuoteParseError(SuperhedgeError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class MissingNumeraireError(SuperhedgeError, ValueError):
    """No strike-0 (underlying) ask is available."""


class EmptyCurveError(SuperhedgeError, ValueError):
    pass


class InsufficientStrikesError(SuperhedgeError, ValueError):
    pass


class InconsistentCurveError(SuperhedgeError, ValueError):
    """Dual coefficients came out negative: the curve is not efficient."""


class NotInGammaError(SuperhedgeError, ValueError):
    """Payoff is not convex with f(0) = 0 and finite asymptotic slope."""


class InfeasibleError(SuperhedgeError, RuntimeError):
    pass


class SolverError(SuperhedgeError, RuntimeError):
    def __init__(self, message: str, iterations: int | None = None, diagnostics: dict | None = None):
        self.iterations = iterations
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ConfigurationError(SuperhedgeError, ValueError):
    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message)


class NoSolutionError(SuperhedgeError, ValueError):
    """Price outside the no-arbitrage bounds of the Black-Scholes formula."""


class DegenerateMeasureError(SuperhedgeError, ValueError):
    pass

"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: domain/admissibility and
configuration errors exit 2, solver divergence or non-convergence exit 3,
file-format problems exit 4.
"""


class HJLabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HJLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AdmissibilityError(DomainError):
    """(gamma, q, d) violate an admissibility inequality, named in the message."""


class ConfigError(HJLabError, ValueError):
    """Invalid run configuration, or mismatched grid/workspace objects."""


class EvaluationError(HJLabError, ArithmeticError):
    """A pointwise evaluation produced a non-finite value at a named node."""


class DivergenceError(HJLabError, ArithmeticError):
    """Pseudo-time relaxation blew up."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NewtonStagnationError(HJLabError, ArithmeticError):
    """Newton refinement failed to converge; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class FieldIOError(HJLabError, OSError):
    """Binary field file is missing, truncated, or malformed."""


class QuadraturePrecisionError(HJLabError, ArithmeticError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved

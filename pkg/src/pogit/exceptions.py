"""Exception types raised across the package."""


class PogitError(Exception):
    """Base class for package errors."""


class SplineSpecError(PogitError, ValueError):
    pass


class DomainError(PogitError, ValueError):
    """Spline evaluated outside its declared domain."""


class SchemaError(PogitError, KeyError):
    """A column referenced by a model is missing or malformed."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericalOverflowError(PogitError, ArithmeticError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class InfeasibleConstraintsError(PogitError, ValueError):
    """No coefficient vector satisfies the constraints.

    ``certificate`` holds the labels of the rows with the largest
    violation at the least-violating point, ``violation`` its size.
    """

    def __init__(self, message, certificate=(), violation=float("nan")):
        super().__init__(message)
        self.certificate = list(certificate)
        self.violation = violation


class RankDeficiencyError(PogitError, ValueError):
    """Information matrix is (numerically) singular.

    ``null_directions`` maps each near-null eigenvector to coefficient names.
    """

    def __init__(self, message, null_directions=()):
        super().__init__(message)
        self.null_directions = list(null_directions)


class OrderingError(PogitError, ValueError):
    """Likelihood-ratio statistic is negative: the models are not nested as claimed."""


class ProtocolError(PogitError, ValueError):
    pass


class ConfigError(PogitError, ValueError):
    """Malformed or inconsistent model configuration."""

"""Exception types shared across the package."""


class HodgeFrobeniusError(Exception):
    """Base class for all package errors."""


class DomainError(HodgeFrobeniusError, ValueError):
    """A value of Q (or a sample point) lies outside its admissible domain."""


class EvaluationError(HodgeFrobeniusError, ArithmeticError):
    """A scalar evaluation or quadrature produced a non-finite or degenerate value."""


class DegreeError(HodgeFrobeniusError, ValueError):
    """An operator was applied to a form of unsupported degree."""


class ShapeError(HodgeFrobeniusError, ValueError):
    """Array shapes or grids of two operands do not match."""


class GeometryError(HodgeFrobeniusError, ValueError):
    """A disc, ring or ray leaves the region where data is available."""


class HypothesisViolation(HodgeFrobeniusError, ValueError):
    """A pointwise hypothesis of a transformation fails somewhere on the grid."""


class DualityViolation(HodgeFrobeniusError, ValueError):
    """The dual field leaves the domain of the paired density."""


class SolverError(HodgeFrobeniusError, RuntimeError):
    """A linear solve failed (singular or indefinite system)."""


class ConfigError(HodgeFrobeniusError, ValueError):
    """A run configuration file is malformed or incomplete."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)

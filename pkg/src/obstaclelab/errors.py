"""Exception hierarchy shared by every module."""


class ObstacleLabError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(ObstacleLabError, ValueError):
    """Invalid parameters, grid specs or config files."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [message]


class DomainError(ObstacleLabError, ValueError):
    """An operator was evaluated outside the nodes where it is defined."""


class GeometryError(DomainError):
    """A probe point or cylinder does not fit inside the required shell."""


class PreconditionError(ObstacleLabError, ValueError):
    """Input fields violate the hypotheses of an operation."""


class NumericError(ObstacleLabError, ArithmeticError):
    """Non-finite values encountered."""


class MollificationError(ObstacleLabError):
    """The mollified initial datum could not be certified within eps."""


class SolverError(ObstacleLabError, RuntimeError):
    """Nonlinear solve did not converge; carries the residual trace."""

    def __init__(self, message, residual=float("nan"), trace=None, level=None):
        super().__init__(message)
        self.residual = residual
        self.trace = list(trace) if trace else []
        self.level = level

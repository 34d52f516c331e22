"""Exception types raised across the package."""


class ThzIrsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ThzIrsError, ValueError):
    """An argument lies outside the domain of the function."""


class ShapeError(ThzIrsError, ValueError):
    """Array dimensions do not line up."""


class NumericalError(ThzIrsError, ArithmeticError):
    """A numerical routine failed (e.g. SVD did not converge)."""


class NotPSDError(NumericalError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class GeometryError(ThzIrsError, ValueError):
    """Two nodes coincide, or a direction vector is degenerate."""


class BudgetError(ThzIrsError, ValueError):
    """An exhaustive search would exceed its evaluation budget."""


class ConfigError(ThzIrsError):
    """Base class for configuration problems."""


class ConfigNotFoundError(ConfigError, FileNotFoundError):
    pass


class ConfigParseError(ConfigError, ValueError):
    pass


class ConfigValueError(ConfigError, ValueError):
    """A config key violates its constraint. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key

"""Exception types raised across the package."""


class BayesRiskError(Exception):
    """Base class for all package errors."""


class DimensionError(BayesRiskError, ValueError):
    """Raised when array shapes are mutually inconsistent."""


class SingularCovarianceError(BayesRiskError, ValueError):
    """Raised when a matrix fails the positive-definiteness gate."""


class InsufficientSamplesError(BayesRiskError, ValueError):
    """Raised when a statistic needs more draws than were supplied."""


class BudgetExceededError(BayesRiskError, ValueError):
    """Raised when an exhaustive search would enumerate too many subsets."""


class ConfigError(BayesRiskError, ValueError):
    """Raised for malformed or inconsistent run configurations."""

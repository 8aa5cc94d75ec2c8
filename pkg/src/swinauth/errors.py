"""Exception types shared across the package.

Each maps onto one failure family; the CLI turns them into exit codes.
"""


class SwinAuthError(Exception):
    """Base class for all package errors."""


class DimensionError(SwinAuthError, ValueError):
    """Tensor or image extents are incompatible with an operation."""


class NumericError(SwinAuthError, FloatingPointError):
    """A non-finite value reached a place where it must not appear."""


class UsageError(SwinAuthError, ValueError):
    """An API was called with arguments that violate its contract."""


class ConfigError(SwinAuthError, ValueError):
    """An architecture or run configuration is internally inconsistent."""


class IngestionError(SwinAuthError):
    """An image or manifest entry could not be read."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class PlanningError(SwinAuthError, ValueError):
    """Partition targets cannot be met by the available paintings."""


class WeightsError(SwinAuthError):
    """A weight container is malformed or disagrees with the model."""

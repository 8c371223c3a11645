"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or argument values."""


class GridMismatchError(ValueError):
    """Inputs were built for incompatible space-time grids."""


class ThinningError(ValueError):
    """No admissible sub-grid exists for the requested thinning."""


class MemoryBudgetError(RuntimeError):
    """A requested allocation exceeds the configured memory budget."""

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit code 1)."""


class NumericsError(RuntimeError):
    """Numerical failure inside a solver (CLI exit code 2)."""

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid model, law, or run configuration."""


class NumericsError(RuntimeError):
    """A numerical procedure failed to meet its accuracy contract."""

class ConfigError(ValueError):
    """Invalid configuration: bad ranges, unknown keys, empty tables."""


class DomainError(ValueError):
    """Geometric query outside the valid domain of a spline."""

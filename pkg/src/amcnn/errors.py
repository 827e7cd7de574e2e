"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class FormatError(ValueError):
    """A file (dataset, vector file, checkpoint) violates its documented format."""


class ConfigError(ValueError):
    """A configuration is internally inconsistent or contains unknown keys."""

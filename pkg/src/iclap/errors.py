"""Exception hierarchy shared across the package."""


class IclapError(Exception):
    """Base class for all package errors."""


class EmptyCloud(IclapError):
    """An operation received an empty (or too small) point set."""


class DimensionError(IclapError):
    """Mixed or unsupported dimensionality."""


class NumericalFailure(IclapError):
    """A numerical routine (e.g. SVD) failed to converge."""


class ConfigError(IclapError):
    """Invalid configuration or unknown identifier."""


class InsufficientData(IclapError):
    """Not enough samples to carry out the requested computation."""


class FormatError(IclapError):
    """Malformed on-disk data."""


class ClassificationError(IclapError):
    """Classification could not produce a usable distance vector."""

"""Exception types shared across the package."""


class TeaCacheError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(TeaCacheError, ValueError):
    pass


class ZeroDenominator(TeaCacheError, ZeroDivisionError):
    pass


class NonFinite(TeaCacheError, ValueError):
    pass


class OddDimension(TeaCacheError, ValueError):
    pass


class BadRange(TeaCacheError, ValueError):
    pass


class BadInterval(TeaCacheError, ValueError):
    pass


class NoCachedResidual(TeaCacheError, RuntimeError):
    pass


class InsufficientData(TeaCacheError, ValueError):
    pass


class DegenerateDesign(TeaCacheError, ValueError):
    pass


class DegenerateVariance(TeaCacheError, ValueError):
    pass


class GridTooSmall(TeaCacheError, ValueError):
    pass


class MissingRescaler(TeaCacheError, FileNotFoundError):
    pass


class ConfigError(TeaCacheError, ValueError):
    pass


class FormatError(TeaCacheError, ValueError):
    """A serialized artifact (weights, rescaler, trace) could not be parsed."""

"""Exception types shared across the package."""


class AstmError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AstmError, ValueError):
    """Invalid lattice or experiment configuration."""


class DimensionError(AstmError, ValueError):
    """Arrays passed to an operation do not agree in shape."""


class FormatError(AstmError, ValueError):
    """A movie or weight file violates its on-disk format."""


class UnsupportedMethodError(AstmError, ValueError):
    """An experiment was asked to run with a method it does not support."""

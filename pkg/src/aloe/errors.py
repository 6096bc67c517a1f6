"""Exception types shared across the package."""


class AloeError(Exception):
    """Base class for errors raised by this package."""


class UsageError(AloeError, ValueError):
    """Invalid arguments: dimension mismatch, bad index, empty inputs."""


class ConfigError(UsageError):
    """A configuration document or preset could not be interpreted."""


class NumericalError(AloeError, ArithmeticError):
    """A factorization failed or a variance went meaningfully negative."""

class SecmarkError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class UsageError(SecmarkError):
    exit_code = 1


class ConfigError(UsageError):
    pass


class DataError(SecmarkError, ValueError):
    exit_code = 2


class NumericalError(SecmarkError, ArithmeticError):
    exit_code = 3


class NotFittedError(SecmarkError, AttributeError):
    exit_code = 1


class ShapeError(SecmarkError, ValueError):
    exit_code = 2

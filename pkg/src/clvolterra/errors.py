"""Exception hierarchy.

Every error raised by the library derives from :class:`VolterraError`. The
three intermediate classes group errors by cause and carry the process exit
code used by the command line front end.
"""

from __future__ import annotations


class VolterraError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(VolterraError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class DataError(VolterraError, ValueError):
    """Input data that cannot be used as given."""

    exit_code = 3


class NumericalError(VolterraError, ArithmeticError):
    """A computation failed or would exceed numeric limits."""

    exit_code = 4


# configuration
class InvalidMemory(ConfigError):
    pass


class InvalidOrder(ConfigError):
    pass


class InvalidLambda(ConfigError):
    pass


class InvalidKernel(ConfigError):
    pass


class UnsupportedKernel(ConfigError):
    pass


class InvalidFamilySize(ConfigError):
    pass


class InvalidGrid(ConfigError):
    pass


class NonStationarySpec(ConfigError):
    pass


# data
class NonFiniteInput(DataError):
    pass


class NonFiniteValue(NonFiniteInput):
    pass


class WindowTooLong(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptySample(EmptyInput):
    pass


class EmptyFile(EmptyInput):
    pass


class InsufficientData(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# numerical
class SingularSystem(NumericalError):
    pass


class Overflow(NumericalError, OverflowError):
    pass


class FeatureSpaceTooLarge(NumericalError):
    pass

"""Exception types shared across the package.

Each class maps onto one CLI exit code so failures stay diagnosable
from shell scripts: configuration problems exit 2, numerical failures
exit 3, file-system problems exit 4.
"""


class NanobeamError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(NanobeamError):
    """Invalid parameters, malformed config files, unknown keys."""

    exit_code = 2


class NumericalError(NanobeamError):
    """A solver failed to converge or produced unusable output."""

    exit_code = 3


class IOFailure(NanobeamError):
    """Missing inputs, unwritable outputs."""

    exit_code = 4

"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: input/config problems exit with 2,
numeric failures at runtime exit with 3.
"""


class IggyError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class InputError(IggyError):
    """Bad input data, unreadable files, schema violations."""

    exit_code = 2


class ConfigError(InputError):
    """Invalid configuration file or command-line override."""


class FormatVersionError(InputError):
    """Serialized artifact carries an unknown format tag."""


class ChecksumError(InputError):
    """Serialized artifact is truncated or its checksum does not match."""


class NumericError(IggyError):
    """Non-finite values or numerically impossible requests at runtime."""

    exit_code = 3

"""Shared error hierarchy.

The CLI maps these onto process exit codes: config problems exit 2, data
problems exit 3, numeric failures (NaN/Inf) exit 4.
"""


class OmniseqError(Exception):
    exit_code = 1


class ConfigError(OmniseqError):
    exit_code = 2


class DataError(OmniseqError):
    exit_code = 3


class NumericError(OmniseqError):
    exit_code = 4


class DimensionError(DataError):
    """Operand shapes do not line up."""

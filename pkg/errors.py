"""Exceptions raised across seldscope.

Every error carries the process exit code the CLI should use, so the
entry point only has to catch SeldError.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class SeldError(Exception):
    exit_code = EXIT_DATA


class UsageError(SeldError):
    exit_code = EXIT_USAGE


class DataError(SeldError):
    exit_code = EXIT_DATA


class SignalError(DataError):
    pass


class ConfigError(DataError):
    pass


class WavFormatError(DataError):
    pass


class CapacityError(DataError):
    pass


class MetadataFormatError(DataError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)

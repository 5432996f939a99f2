"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class InfoExtractError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidInput(InfoExtractError, ValueError):
    pass


class FormatError(InfoExtractError):
    pass


class ParseError(FormatError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class RefusedOverwrite(InfoExtractError):
    pass


class CapacityExceeded(InfoExtractError):
    pass


class Unsupported(InfoExtractError):
    pass


class NumericalFailure(InfoExtractError, ArithmeticError):
    exit_code = 2

"""Exception hierarchy shared by all nlgen modules."""


class NlgError(Exception):
    """Base class for every error raised by nlgen."""


class MalformedMr(NlgError):
    pass


class DuplicateSlot(MalformedMr):
    pass


class ParseError(NlgError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DatasetIoError(NlgError, OSError):
    pass


class NotDelexicalizable(NlgError):
    pass


class ConfigError(NlgError):
    pass


class EmptySource(NlgError):
    pass


class CheckpointError(NlgError):
    pass


class CheckpointIoError(CheckpointError, OSError):
    pass


class VersionMismatch(CheckpointError):
    pass


class ShapeMismatch(CheckpointError):
    pass


class DomainError(NlgError, ValueError):
    pass


class EmptyPool(NlgError):
    pass


class EmptyInput(NlgError, ValueError):
    pass


class GrammarError(NlgError):
    pass

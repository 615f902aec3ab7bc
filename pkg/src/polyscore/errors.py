"""Exception hierarchy shared by every polyscore module."""


class PolyscoreError(Exception):
    """Base class; the CLI maps any subclass to exit status 1."""


class FormatError(PolyscoreError, ValueError):
    """A file does not parse as its documented format."""

    def __init__(self, message, path=None, line=None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path + (f":{line}" if line is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(PolyscoreError, ValueError):
    """Parsed data violates a domain invariant."""


class UnknownSymbolError(ValidationError):
    pass


class TableError(ValidationError):
    pass


class UndefinedCorrelationError(PolyscoreError, ArithmeticError):
    """Pearson correlation requested for a zero-variance operand."""


class CheckpointError(PolyscoreError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class TrainingError(PolyscoreError, RuntimeError):
    pass

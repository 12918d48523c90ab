"""Exception hierarchy shared across the package."""


class QipError(Exception):
    pass


class ConfigurationError(QipError, ValueError):
    """Invalid sizes, unknown keys, incompatible specs."""


class EncodingError(QipError, ValueError):
    """A feature vector cannot be encoded (e.g. zero vector for amplitude)."""


class TrainingFault(QipError, RuntimeError):
    """Non-finite loss, activation or gradient during training."""

    def __init__(self, message: str, step: int | None = None, parameter: str | None = None):
        self.step = step
        self.parameter = parameter
        where = []
        if step is not None:
            where.append(f"step {step}")
        if parameter is not None:
            where.append(f"parameter {parameter!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class FileFormatError(QipError, ValueError):
    pass


class BadMagicError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


class CountMismatchError(FileFormatError):
    pass


class VersionError(FileFormatError):
    """Wrong magic or version tag on a binary feature/checkpoint file."""


class DimensionOverflowError(FileFormatError):
    pass

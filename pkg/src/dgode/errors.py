class DgodeError(Exception):
    """Base class for every error raised by this package.

    ``line`` is set by the dataset loader so callers can point at the
    offending record.
    """

    def __init__(self, message="", line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ShapeError(DgodeError, ValueError):
    pass


class SymmetryError(ShapeError):
    pass


class DimensionError(ShapeError):
    pass


class DiagonalizabilityError(DgodeError, ValueError):
    pass


class EmptyInputError(DgodeError, ValueError):
    pass


class UnknownSpeakerError(DgodeError, LookupError):
    pass


class LabelError(DgodeError, ValueError):
    pass


class ParseError(DgodeError, ValueError):
    pass


class ConfigError(DgodeError, ValueError):
    pass

"""Exception types shared across the package."""


class SoundSegError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SoundSegError):
    """Tensor/array shapes are inconsistent with the operation's contract."""


class LengthMismatch(SoundSegError):
    """RLE counts do not sum to height * width."""


class ParseError(SoundSegError):
    """A source file or annotation record could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateAlias(SoundSegError):
    """The same (dataset, label) pair was registered twice."""


class EmptyJoin(SoundSegError):
    """Visual and audio pools share no canonical class."""


class TooShort(SoundSegError):
    """Waveform is too short to produce even one spectrogram segment."""


class DivergenceError(SoundSegError):
    """Training loss became non-finite."""


class TooFewClasses(SoundSegError):
    """Not enough distinct classes to build the requested split."""


class EmptyAccumulator(SoundSegError):
    """Aggregation requested on an accumulator with no samples."""

"""Exception hierarchy shared across the pipeline."""


class C2CError(Exception):
    """Base class for every error raised by this package."""


class DataError(C2CError):
    """Input data is malformed or inconsistent (CLI exit code 2)."""


class WavFormatError(DataError):
    def __init__(self, chunk, message):
        self.chunk = chunk
        super().__init__(f"malformed WAV ({chunk!r} chunk): {message}")


class UnsupportedFormatError(DataError):
    pass


class EmptyAudioError(DataError):
    pass


class ManifestError(DataError):
    def __init__(self, line, message, path=None):
        self.line = line
        self.message = message
        self.path = path
        where = f"{path}: line {line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")


class ManifestValueError(ManifestError, ValueError):
    pass


class SplitInfeasibleError(DataError):
    pass


class TooShortError(DataError):
    pass


class EmptySegmentError(DataError):
    pass


class ConfigError(C2CError, ValueError):
    pass


class ShapeError(C2CError, ValueError):
    pass


class UndefinedMetricError(C2CError, ValueError):
    pass


class CheckpointError(DataError):
    pass


class NumericalError(C2CError, FloatingPointError):
    """Training diverged (NaN or inf in the loss)."""

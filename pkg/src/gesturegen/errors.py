"""Exception types raised across the toolkit.

Every error the package raises deliberately derives from ``GestureGenError``
so callers (and the CLI) can separate user-facing validation failures from
genuine bugs.
"""


class GestureGenError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(GestureGenError, ValueError):
    """An argument violates a documented precondition."""


class BvhParseError(GestureGenError, ValueError):
    """Malformed BVH input. Carries the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedRatioError(GestureGenError, ValueError):
    """Frame-rate resampling requested with a non-integer decimation ratio."""


class MissingJointError(GestureGenError, KeyError):
    """A joint selection names a joint absent from the hierarchy."""


class AudioFormatError(GestureGenError, ValueError):
    """Audio input is not the supported 16-bit PCM RIFF/WAVE encoding."""


class TooShortError(GestureGenError, ValueError):
    """A signal or trajectory is shorter than the operation requires."""


class TranscriptError(GestureGenError, ValueError):
    """Transcript document fails validation (ordering, interval sanity)."""


class AlignmentError(GestureGenError, ValueError):
    """Feature sequences that must share a frame count do not."""


class ChunkSizeError(GestureGenError, ValueError):
    """Discriminator input does not have the fixed chunk length."""


class ShapeError(GestureGenError, ValueError):
    """A tensor has the wrong shape for the model it is loaded into."""


class ConfigError(GestureGenError, ValueError):
    """Bad configuration text. Carries the 1-based line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CheckpointError(GestureGenError, ValueError):
    """Checkpoint file is truncated, has a bad magic, or a bad version."""


class NumericalError(GestureGenError, ArithmeticError):
    """Training produced a non-finite loss; aborts with diagnostics."""

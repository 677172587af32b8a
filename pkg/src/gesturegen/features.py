"""Frame-aligned feature sequences and the GGF1 cache format.

All features live on the shared 20 FPS clock. A feature sequence is a
(T, D) float matrix with a kind tag; the model input concatenates text,
audio, and a per-utterance noise vector repeated on every frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, InvalidInputError

#: Shared frame rate for gestures and all speech features.
FRAME_RATE = 20.0

#: Column widths of the audio feature variants.
AUDIO_WIDTHS = {
    "mfcc": 26,
    "mel": 26,
    "prosodic": 4,
    "mfcc+prosodic": 30,
    "mel+prosodic": 30,
}

TEXT_DIM = 768


@dataclass
class FeatureSequence:
    """A (T, D) feature matrix at 20 FPS with a kind tag."""

    frames: np.ndarray
    kind: str
    fps: float = FRAME_RATE

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise InvalidInputError(f"frames must be 2-D, got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise InvalidInputError(f"{self.kind} features contain non-finite values")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def width(self) -> int:
        return self.frames.shape[1]


def build_model_input(
    audio: FeatureSequence, text: FeatureSequence, noise: np.ndarray
) -> FeatureSequence:
    """Concatenate [text | audio | noise] per frame into the generator input.

    The single noise vector is repeated on every frame, so for the full model
    the width is 768 + 26 + 20 = 814.
    """
    if audio.n_frames != text.n_frames:
        raise AlignmentError(
            f"audio has {audio.n_frames} frames but text has {text.n_frames}"
        )
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 1:
        raise InvalidInputError(f"noise must be a vector, got shape {noise.shape}")
    tiled = np.tile(noise, (audio.n_frames, 1))
    frames = np.hstack([text.frames, audio.frames, tiled])
    return FeatureSequence(frames=frames, kind="combined")


# ---------------------------------------------------------------------------
# GGF1 feature cache: magic "GGF1", u32 frame count, u32 width, then
# row-major 32-bit little-endian floats.
# ---------------------------------------------------------------------------

_GGF_MAGIC = b"GGF1"


def write_ggf(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.ndim != 2:
        raise InvalidInputError(f"GGF1 stores 2-D matrices, got shape {array.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", _GGF_MAGIC, array.shape[0], array.shape[1]))
        fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def read_ggf(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise InvalidInputError(f"{path}: truncated GGF1 header")
        magic, n_frames, width = struct.unpack("<4sII", header)
        if magic != _GGF_MAGIC:
            raise InvalidInputError(f"{path}: bad magic {magic!r}")
        data = fh.read(4 * n_frames * width)
        if len(data) != 4 * n_frames * width:
            raise InvalidInputError(f"{path}: truncated GGF1 payload")
        return np.frombuffer(data, dtype="<f4").reshape(n_frames, width).astype(np.float32)

"""WAV decoding and frame-aligned acoustic feature extraction.

Features are computed at the shared 20 FPS clock: audio is resampled to
16 kHz and cut into non-overlapping 50 ms windows (hop = window = 800
samples), so every output row covers exactly one gesture frame.

The MFCC recipe: pre-emphasis 0.97, Hann window, magnitude-squared rFFT,
26 triangular mel filters spanning 0-8 kHz, log with a 1e-10 floor, then an
orthonormal DCT-II keeping all 26 coefficients. The mel variant stops before
the DCT. The prosodic variant is 4-dimensional: log-F0 from normalized
autocorrelation (0 when unvoiced), a voicing flag, log RMS energy, and the
frame-to-frame energy delta.
"""

from __future__ import annotations

import io
import math
import wave
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.signal import resample_poly

from .errors import AudioFormatError, InvalidInputError, TooShortError
from .features import AUDIO_WIDTHS, FRAME_RATE, FeatureSequence

#: Internal analysis rate; inputs at other rates are resampled to this.
ANALYSIS_RATE = 16000

#: Window and hop length in seconds (one window per 20 FPS frame).
WINDOW_S = 1.0 / FRAME_RATE  # 0.05

PREEMPHASIS = 0.97
N_MELS = 26
MEL_FMIN = 0.0
MEL_FMAX = 8000.0
LOG_FLOOR = 1e-10

F0_MIN = 50.0
F0_MAX = 400.0
VOICING_THRESHOLD = 0.45


@dataclass
class AudioTrack:
    """Mono audio samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InvalidInputError("audio samples must be a non-empty vector")
        if self.sample_rate <= 0:
            raise InvalidInputError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(data: bytes) -> AudioTrack:
    """Decode a RIFF/WAVE byte string (16-bit PCM, mono or stereo).

    Stereo is averaged to mono; samples are scaled by 1/32768 so full scale
    maps to [-1, 32767/32768]. Anything but 16-bit PCM raises
    :class:`AudioFormatError`.
    """
    try:
        with wave.open(io.BytesIO(data), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise AudioFormatError(f"unsupported WAV compression {wf.getcomptype()!r}")
            if wf.getsampwidth() != 2:
                raise AudioFormatError(
                    f"only 16-bit PCM is supported, got {8 * wf.getsampwidth()}-bit"
                )
            n_channels = wf.getnchannels()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"not a readable WAV stream: {exc}") from exc

    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    if samples.size == 0:
        raise AudioFormatError("WAV stream holds no samples")
    return AudioTrack(samples=samples, sample_rate=rate)


def read_wav_file(path) -> AudioTrack:
    with open(path, "rb") as fh:
        return read_wav(fh.read())


# ---------------------------------------------------------------------------
# Feature extraction
# ---------------------------------------------------------------------------


def mel_filterbank(
    n_filters: int = N_MELS,
    n_fft: int | None = None,
    sample_rate: int = ANALYSIS_RATE,
    fmin: float = MEL_FMIN,
    fmax: float = MEL_FMAX,
) -> np.ndarray:
    """Triangular mel filters evaluated at rFFT bin frequencies.

    Returns a (n_filters, n_fft//2 + 1) weight matrix. Filter peaks are
    mel-spaced between ``fmin`` and ``fmax``; weights are the triangular
    response at each bin's continuous frequency.
    """
    if n_fft is None:
        n_fft = int(round(sample_rate * WINDOW_S))

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    points = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)

    weights = np.zeros((n_filters, bin_freqs.size))
    for j in range(n_filters):
        lo, mid, hi = points[j], points[j + 1], points[j + 2]
        rising = (bin_freqs - lo) / (mid - lo)
        falling = (hi - bin_freqs) / (hi - mid)
        weights[j] = np.maximum(0.0, np.minimum(rising, falling))
    return weights


def _to_analysis_rate(track: AudioTrack) -> np.ndarray:
    if track.sample_rate < ANALYSIS_RATE:
        raise InvalidInputError(
            f"sample rate must be >= {ANALYSIS_RATE} Hz, got {track.sample_rate}"
        )
    if track.sample_rate == ANALYSIS_RATE:
        return track.samples.copy()
    g = math.gcd(track.sample_rate, ANALYSIS_RATE)
    return resample_poly(track.samples, ANALYSIS_RATE // g, track.sample_rate // g)


def _frame_signal(x: np.ndarray, size: int, hop: int) -> np.ndarray:
    if x.size < size:
        raise TooShortError(
            f"track has {x.size} samples, below one {size}-sample window"
        )
    n_frames = (x.size - size) // hop + 1
    idx = hop * np.arange(n_frames)[:, None] + np.arange(size)[None, :]
    return x[idx]


def _log_mel(frames: np.ndarray, sample_rate: int) -> np.ndarray:
    window = np.hanning(frames.shape[1])
    spectrum = np.fft.rfft(frames * window, axis=1)
    power = np.abs(spectrum) ** 2
    energies = power @ mel_filterbank(N_MELS, frames.shape[1], sample_rate).T
    return np.log(np.maximum(energies, LOG_FLOOR))


def _normalized_autocorr(x: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    """rho(tau) = sum x[t] x[t+tau] / sqrt(head energy * tail energy)."""
    n = x.size
    full = np.fft.irfft(np.abs(np.fft.rfft(x, 2 * n)) ** 2, 2 * n)[: lag_max + 1]
    cs = np.cumsum(x * x)
    lags = np.arange(lag_min, lag_max + 1)
    head = cs[n - 1 - lags]
    tail = cs[-1] - cs[lags - 1]
    denom = np.sqrt(np.maximum(head * tail, 1e-300))
    return full[lags] / denom


def _prosodic(frames: np.ndarray, sample_rate: int) -> np.ndarray:
    lag_min = int(sample_rate / F0_MAX)
    lag_max = min(int(sample_rate / F0_MIN), frames.shape[1] - 1)
    out = np.zeros((frames.shape[0], 4))
    prev_log_e = 0.0
    for f, frame in enumerate(frames):
        rms = np.sqrt(np.mean(frame**2))
        log_e = np.log(max(rms, LOG_FLOOR))
        best_rho, best_lag = 0.0, 0
        if rms > 1e-5:
            rho = _normalized_autocorr(frame - frame.mean(), lag_min, lag_max)
            top = float(rho.max())
            if top > 0:
                # smallest lag near the peak, so period multiples do not
                # halve the pitch; then climb to the local maximum
                peak = int(np.argmax(rho >= 0.95 * top))
                while peak + 1 < rho.size and rho[peak + 1] > rho[peak]:
                    peak += 1
                best_rho, best_lag = rho[peak], lag_min + peak
        voiced = best_rho >= VOICING_THRESHOLD and best_lag > 0
        out[f, 0] = np.log(sample_rate / best_lag) if voiced else 0.0
        out[f, 1] = 1.0 if voiced else 0.0
        out[f, 2] = log_e
        out[f, 3] = 0.0 if f == 0 else log_e - prev_log_e
        prev_log_e = log_e
    return out


def audio_features(track: AudioTrack, kind: str = "mfcc") -> FeatureSequence:
    """Extract one of the audio feature variants, one row per 20 FPS frame.

    ``kind`` is one of mfcc, mel, prosodic, mfcc+prosodic, mel+prosodic;
    combined kinds concatenate columns. Deterministic in (samples, kind).
    """
    if kind not in AUDIO_WIDTHS:
        raise InvalidInputError(f"unknown audio feature kind {kind!r}")
    x = _to_analysis_rate(track)
    size = int(round(ANALYSIS_RATE * WINDOW_S))
    raw_frames = _frame_signal(x, size, size)

    parts = []
    for part in kind.split("+"):
        if part in ("mfcc", "mel"):
            emphasized = np.concatenate([x[:1], x[1:] - PREEMPHASIS * x[:-1]])
            log_mel = _log_mel(_frame_signal(emphasized, size, size), ANALYSIS_RATE)
            if part == "mel":
                parts.append(log_mel)
            else:
                parts.append(dct(log_mel, type=2, axis=1, norm="ortho"))
        else:
            parts.append(_prosodic(raw_frames, ANALYSIS_RATE))
    frames = parts[0] if len(parts) == 1 else np.hstack(parts)
    return FeatureSequence(frames=frames, kind=kind)

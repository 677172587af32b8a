"""Generator and discriminator networks plus autoregressive generation.

The generator runs a 2-layer bidirectional GRU over a 15-frame window of
the 814-dim speech input (768 text + 26 MFCC + 20 noise), flattens the
15 x 256 outputs to 3840, projects to 512 with TanH, modulates with FiLM
coefficients computed from the 135-dim previous-pose context (3 x 45), and
maps 512 -> 256 -> 45 with a final TanH, producing one standardized pose.

The discriminator embeds each 40-frame stream (gestures 45, audio 26, text
768) per frame to 64 dims, concatenates to 192 channels, reduces time
40 -> 38 -> 18 -> 16 -> 7 -> 5 -> 1 through six 1-D convolutions (LeakyReLU +
layer norm after the first five), and scores via 1024 -> 512 -> 256 -> 1
with a sigmoid in the default bounded mode.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .bvh import REP_EXPMAP, MotionClip
from .errors import ChunkSizeError, InvalidInputError
from .features import AUDIO_WIDTHS, FRAME_RATE, TEXT_DIM
from .config import TrainConfig

LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class ModelDims:
    """All layer sizes; defaults are the full-scale architecture."""

    text_dim: int = TEXT_DIM
    audio_dim: int = 26
    noise_dim: int = 20
    pose_dim: int = 45
    window: int = 15
    prev_poses: int = 3
    gru_hidden: int = 128
    gru_layers: int = 2
    dropout: float = 0.2
    gen_hidden: int = 512
    gen_bottleneck: int = 256
    stream_hidden: int = 32
    stream_out: int = 64
    conv_channels: tuple[int, ...] = (192, 256, 256, 512, 512, 1024)
    conv_kernels: tuple[int, ...] = (3, 4, 3, 4, 3, 4)
    conv_strides: tuple[int, ...] = (1, 2, 1, 2, 1, 2)
    head_dims: tuple[int, ...] = (512, 256)
    chunk: int = 40
    use_text: bool = True
    use_audio: bool = True
    use_gru: bool = True
    use_film: bool = True
    bounded: bool = True  # sigmoid on the discriminator output

    @property
    def input_dim(self) -> int:
        return (
            (self.text_dim if self.use_text else 0)
            + (self.audio_dim if self.use_audio else 0)
            + self.noise_dim
        )

    @property
    def feature_dim(self) -> int:
        """Width of the conditioning features (input minus noise)."""
        return self.input_dim - self.noise_dim

    @property
    def ctx_dim(self) -> int:
        return self.prev_poses * self.pose_dim

    @property
    def n_streams(self) -> int:
        return 1 + int(self.use_text) + int(self.use_audio)

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "ModelDims":
        return cls(
            audio_dim=AUDIO_WIDTHS[cfg.audio_features],
            noise_dim=cfg.noise_dim,
            window=cfg.window,
            prev_poses=cfg.prev_poses,
            chunk=cfg.chunk,
            use_text=not cfg.no_text,
            use_audio=not cfg.no_audio,
            use_gru=not cfg.no_gru,
            use_film=not cfg.no_film,
            bounded=cfg.adversarial == "paper-sigmoid",
        )


def conv_output_lengths(length: int, dims: ModelDims) -> list[int]:
    """Temporal lengths after each discriminator convolution."""
    lengths = []
    for k, s in zip(dims.conv_kernels, dims.conv_strides):
        length = (length - k) // s + 1
        lengths.append(length)
    return lengths


class Generator(nn.Module):
    def __init__(self, dims: ModelDims):
        super().__init__()
        self.dims = dims
        flat = dims.window * 2 * dims.gru_hidden
        if dims.use_gru:
            self.gru = nn.GRU(
                dims.input_dim,
                dims.gru_hidden,
                num_layers=dims.gru_layers,
                batch_first=True,
                bidirectional=True,
                dropout=dims.dropout if dims.gru_layers > 1 else 0.0,
            )
        else:
            # Ablation: the recurrent layer is replaced by a per-window
            # flatten + linear map so downstream shapes are unchanged.
            self.flatten_fc = nn.Linear(dims.window * dims.input_dim, flat)
        self.fc1 = nn.Linear(flat, dims.gen_hidden)
        if dims.use_film:
            self.film_gamma = nn.Linear(dims.ctx_dim, dims.gen_hidden)
            self.film_beta = nn.Linear(dims.ctx_dim, dims.gen_hidden)
        self.fc2 = nn.Linear(dims.gen_hidden, dims.gen_bottleneck)
        self.out = nn.Linear(dims.gen_bottleneck, dims.pose_dim)

    def forward(self, windows: torch.Tensor, ctx: torch.Tensor | None = None) -> torch.Tensor:
        """Map (B, window, input_dim) windows and (B, ctx_dim) contexts to
        (B, pose_dim) standardized poses in (-1, 1)."""
        d = self.dims
        if windows.ndim != 3 or windows.shape[1:] != (d.window, d.input_dim):
            raise InvalidInputError(
                f"expected windows (B, {d.window}, {d.input_dim}), got {tuple(windows.shape)}"
            )
        if d.use_film and (
            ctx is None or ctx.ndim != 2 or ctx.shape != (windows.shape[0], d.ctx_dim)
        ):
            raise InvalidInputError(
                f"expected context (B, {d.ctx_dim}), got "
                f"{None if ctx is None else tuple(ctx.shape)}"
            )
        if d.use_gru:
            h, _ = self.gru(windows)
            h = h.reshape(h.shape[0], -1)
        else:
            h = self.flatten_fc(windows.reshape(windows.shape[0], -1))
        h = torch.tanh(self.fc1(h))
        if d.use_film:
            # identity-offset FiLM: gamma = 1 + linear(ctx), so the freshly
            # initialized (zero-bias) pathway is a neutral modulation
            h = (1.0 + self.film_gamma(ctx)) * h + self.film_beta(ctx)
        return torch.tanh(self.out(self.fc2(h)))


class Discriminator(nn.Module):
    def __init__(self, dims: ModelDims):
        super().__init__()
        self.dims = dims

        def stream(width: int) -> nn.Module:
            return nn.Sequential(
                nn.Linear(width, dims.stream_hidden),
                nn.LeakyReLU(LEAKY_SLOPE),
                nn.Linear(dims.stream_hidden, dims.stream_out),
            )

        self.gesture_stream = stream(dims.pose_dim)
        if dims.use_audio:
            self.audio_stream = stream(dims.audio_dim)
        if dims.use_text:
            self.text_stream = stream(dims.text_dim)

        in_ch = dims.stream_out * dims.n_streams
        convs, norms = [], []
        for out_ch, k, s in zip(dims.conv_channels, dims.conv_kernels, dims.conv_strides):
            convs.append(nn.Conv1d(in_ch, out_ch, kernel_size=k, stride=s))
            norms.append(nn.LayerNorm(out_ch))
            in_ch = out_ch
        if conv_output_lengths(dims.chunk, dims)[-1] != 1:
            raise InvalidInputError(
                f"chunk length {dims.chunk} does not reduce to 1 through the conv stack"
            )
        self.convs = nn.ModuleList(convs)
        # Layer norm follows the first five (block) convs; the last conv is plain.
        self.norms = nn.ModuleList(norms[:-1])

        head = []
        width = dims.conv_channels[-1]
        for h in dims.head_dims:
            head.append(nn.Linear(width, h))
            width = h
        head.append(nn.Linear(width, 1))
        self.head = nn.ModuleList(head)

    def forward(
        self,
        gestures: torch.Tensor,
        audio: torch.Tensor | None = None,
        text: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Score (B, chunk, ...) streams; returns (B,) in (0, 1) when bounded."""
        d = self.dims
        if gestures.ndim != 3 or gestures.shape[2] != d.pose_dim:
            raise InvalidInputError(
                f"expected gestures (B, {d.chunk}, {d.pose_dim}), got {tuple(gestures.shape)}"
            )
        if gestures.shape[1] != d.chunk:
            raise ChunkSizeError(
                f"discriminator needs {d.chunk}-frame chunks, got {gestures.shape[1]}"
            )
        parts = [self.gesture_stream(gestures)]
        if d.use_audio:
            if audio is None or audio.shape != (gestures.shape[0], d.chunk, d.audio_dim):
                raise InvalidInputError("audio stream missing or mis-shaped")
            parts.append(self.audio_stream(audio))
        if d.use_text:
            if text is None or text.shape != (gestures.shape[0], d.chunk, d.text_dim):
                raise InvalidInputError("text stream missing or mis-shaped")
            parts.append(self.text_stream(text))

        h = torch.cat(parts, dim=2).transpose(1, 2)  # (B, C, T)
        for i, conv in enumerate(self.convs):
            h = conv(h)
            if i < len(self.norms):
                h = F.leaky_relu(h, LEAKY_SLOPE)
                h = self.norms[i](h.transpose(1, 2)).transpose(1, 2)
        h = h.squeeze(2)  # (B, conv_channels[-1]); time reduced to 1
        for linear in self.head[:-1]:
            h = F.leaky_relu(linear(h), LEAKY_SLOPE)
        score = self.head[-1](h).squeeze(1)
        return torch.sigmoid(score) if d.bounded else score


def _init_module(module: nn.Module, gen: torch.Generator) -> None:
    # Weight matrices: uniform +-sqrt(1/fan_in); biases zero; 1-D scale
    # parameters (layer norm) stay at one.
    for name, p in module.named_parameters():
        with torch.no_grad():
            if p.ndim >= 2:
                fan_in = int(np.prod(p.shape[1:]))
                bound = math.sqrt(1.0 / fan_in)
                p.uniform_(-bound, bound, generator=gen)
            elif name.endswith("bias"):
                p.zero_()
            else:
                p.fill_(1.0)


def init_params(seed: int, dims: ModelDims) -> tuple[Generator, Discriminator]:
    """Build both networks with deterministic seeded initialization."""
    generator = Generator(dims)
    discriminator = Discriminator(dims)
    gen_rng = torch.Generator().manual_seed(seed)
    _init_module(generator, gen_rng)
    _init_module(discriminator, gen_rng)
    return generator, discriminator


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


@dataclass
class Normalization:
    """Per-dimension training-set mean/std for features and poses.

    Both networks consume standardized values; generated poses are mapped
    back through :meth:`invert_poses`. Stds are floored at 1e-6 so constant
    columns (e.g. silent text dimensions) stay finite.
    """

    feat_mean: np.ndarray
    feat_std: np.ndarray
    pose_mean: np.ndarray
    pose_std: np.ndarray

    def __post_init__(self):
        for name in ("feat_mean", "feat_std", "pose_mean", "pose_std"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float32))
        self.feat_std = np.maximum(self.feat_std, 1e-6)
        self.pose_std = np.maximum(self.pose_std, 1e-6)

    @classmethod
    def fit(cls, feature_arrays, pose_arrays) -> "Normalization":
        feats = np.concatenate([np.asarray(a, dtype=np.float64) for a in feature_arrays])
        poses = np.concatenate([np.asarray(a, dtype=np.float64) for a in pose_arrays])
        return cls(
            feat_mean=feats.mean(axis=0),
            feat_std=feats.std(axis=0),
            pose_mean=poses.mean(axis=0),
            pose_std=poses.std(axis=0),
        )

    def apply_features(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float32) - self.feat_mean) / self.feat_std

    def apply_poses(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float32) - self.pose_mean) / self.pose_std

    def invert_poses(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float32) * self.pose_std + self.pose_mean


# ---------------------------------------------------------------------------
# Sequence generation
# ---------------------------------------------------------------------------


class GenerationContext:
    """Ring buffer of the most recent generated poses (standardized)."""

    def __init__(self, initial_pose: np.ndarray, size: int = 3):
        initial_pose = np.asarray(initial_pose, dtype=np.float32)
        self._poses = deque([initial_pose.copy() for _ in range(size)], maxlen=size)

    def push(self, pose: np.ndarray) -> None:
        self._poses.appendleft(np.asarray(pose, dtype=np.float32))

    def vector(self) -> np.ndarray:
        """Concatenated history, most recent pose first."""
        return np.concatenate(list(self._poses))


def sliding_windows(x: torch.Tensor, window: int) -> torch.Tensor:
    """Centered windows over dim 0 with edge replication: (T, D) -> (T, window, D)."""
    pad = window // 2
    padded = torch.cat([x[:1].expand(pad, -1), x, x[-1:].expand(pad, -1)])
    return padded.unfold(0, window, 1).permute(0, 2, 1)


def generator_step(
    generator: Generator, window: np.ndarray, ctx: GenerationContext
) -> np.ndarray:
    """One standardized pose from one speech window and the pose history."""
    generator.eval()
    with torch.no_grad():
        win = torch.as_tensor(np.asarray(window, dtype=np.float32)).unsqueeze(0)
        c = torch.as_tensor(ctx.vector()).unsqueeze(0)
        return generator(win, c).squeeze(0).numpy()


def generate_sequence(
    generator: Generator,
    norm: Normalization,
    features: np.ndarray,
    noise: np.ndarray,
    initial_pose: np.ndarray,
) -> MotionClip:
    """Autoregressively generate a motion clip from speech features.

    ``features`` is the unstandardized (T, text+audio) conditioning matrix;
    ``noise`` (noise_dim,) is appended to every frame; ``initial_pose`` is an
    exponential-map pose seeding the FiLM history. Deterministic given its
    arguments. Returns a (T, 45) exponential-map clip at 20 FPS.
    """
    dims = generator.dims
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != dims.feature_dim:
        raise InvalidInputError(
            f"expected features (T, {dims.feature_dim}), got {features.shape}"
        )
    if features.shape[0] < 1:
        raise InvalidInputError("need at least one feature frame")
    noise = np.asarray(noise, dtype=np.float32)
    if noise.shape != (dims.noise_dim,):
        raise InvalidInputError(f"expected noise ({dims.noise_dim},), got {noise.shape}")

    std_feats = torch.as_tensor(norm.apply_features(features))
    noise_cols = torch.as_tensor(noise).expand(std_feats.shape[0], -1)
    full = torch.cat([std_feats, noise_cols], dim=1)
    windows = sliding_windows(full, dims.window)

    ctx = GenerationContext(norm.apply_poses(initial_pose), size=dims.prev_poses)
    generator.eval()
    out = np.empty((features.shape[0], dims.pose_dim), dtype=np.float32)
    with torch.no_grad():
        for t in range(features.shape[0]):
            win = windows[t].unsqueeze(0)
            c = torch.as_tensor(ctx.vector()).unsqueeze(0)
            pose_std = generator(win, c).squeeze(0).numpy()
            ctx.push(pose_std)
            out[t] = pose_std
    return MotionClip(fps=FRAME_RATE, frames=norm.invert_poses(out), rep=REP_EXPMAP)


def discriminator_forward(
    discriminator: Discriminator,
    gestures: np.ndarray,
    audio: np.ndarray | None = None,
    text: np.ndarray | None = None,
) -> float:
    """Score one chunk; in the default bounded mode the result is in (0, 1)."""
    discriminator.eval()

    def to_batch(x):
        if x is None:
            return None
        return torch.as_tensor(np.asarray(x, dtype=np.float32)).unsqueeze(0)

    with torch.no_grad():
        score = discriminator(to_batch(gestures), to_batch(audio), to_batch(text))
    return float(score.squeeze(0))

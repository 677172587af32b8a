"""Plain-text key=value configuration for training and the pipeline.

The file format is one ``key=value`` per line with ``#`` comments. Unknown
keys are rejected; missing keys fall back to the documented defaults below.
``lambda`` (a Python keyword) maps to the ``lam`` field, and ``beta1``/
``beta2`` to the Adam moment decays.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .bvh import DEFAULT_JOINT_NAMES
from .errors import ConfigError
from .features import AUDIO_WIDTHS

ADVERSARIAL_MODES = ("paper-sigmoid", "clipped-critic")
EMBEDDING_PROVIDERS = ("stub", "pretrained")


@dataclass
class TrainConfig:
    """Loss weights, optimizer settings, window sizes, and ablation switches."""

    alpha: float = 1.0        # weight of the pose MSE term
    beta: float = 0.6         # weight of the speed-continuity term
    lam: float = 0.3          # weight of the adversarial term (key: lambda)
    lr: float = 1e-4
    adam_beta1: float = 0.9   # key: beta1
    adam_beta2: float = 0.999  # key: beta2
    batch: int = 64
    epochs: int = 100
    chunk: int = 40           # discriminator chunk length (2 s at 20 FPS)
    window: int = 15          # generator speech context window (centered)
    prev_poses: int = 3       # FiLM conditioning history length
    noise_dim: int = 20
    seed: int = 0
    no_text: bool = False
    no_audio: bool = False
    no_gru: bool = False
    no_film: bool = False
    audio_features: str = "mfcc"
    adversarial: str = "paper-sigmoid"
    clip: float = 0.01        # critic weight clamp in clipped-critic mode

    def validate(self) -> None:
        for name in ("alpha", "beta", "lam"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss weight {name} must be >= 0")
        if self.audio_features not in AUDIO_WIDTHS:
            raise ConfigError(
                f"audio_features must be one of {sorted(AUDIO_WIDTHS)}, "
                f"got {self.audio_features!r}"
            )
        if self.adversarial not in ADVERSARIAL_MODES:
            raise ConfigError(
                f"adversarial must be one of {ADVERSARIAL_MODES}, got {self.adversarial!r}"
            )
        if self.no_text and self.no_audio:
            raise ConfigError("no_text and no_audio cannot both be set")
        for name in ("batch", "epochs", "chunk", "window", "prev_poses", "noise_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.window % 2 != 1:
            raise ConfigError("window must be odd (centered on the output frame)")


@dataclass
class PipelineConfig(TrainConfig):
    """TrainConfig plus data locations and provider choices for the CLI."""

    data_dir: str = "data"
    cache_dir: str = "cache"
    out_dir: str = "out"
    joints: tuple[str, ...] = DEFAULT_JOINT_NAMES
    embeddings: str = "stub"
    bert_model: str = "bert-base-uncased"
    num_threads: int = 1      # reference mode is single-threaded
    eval_samples: int = 50

    def validate(self) -> None:
        super().validate()
        if len(self.joints) != 15:
            raise ConfigError(f"joints must list 15 names, got {len(self.joints)}")
        if self.embeddings not in EMBEDDING_PROVIDERS:
            raise ConfigError(
                f"embeddings must be one of {EMBEDDING_PROVIDERS}, got {self.embeddings!r}"
            )


_KEY_TO_FIELD = {"lambda": "lam", "beta1": "adam_beta1", "beta2": "adam_beta2"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(value: str, default, key: str, line: int):
    if isinstance(default, bool):
        lowered = value.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}", line)
    if isinstance(default, int):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}", line) from None
    if isinstance(default, float):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {value!r}", line) from None
    if isinstance(default, tuple):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


def parse_config(text: str, cls=PipelineConfig):
    """Parse key=value text into a config object, validating every key."""
    defaults = cls()
    known = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(cls)}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key=value, got {stripped!r}", lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        field = _KEY_TO_FIELD.get(key, key)
        if field not in known:
            raise ConfigError(f"unknown key {key!r}", lineno)
        overrides[field] = _convert(value, known[field], key, lineno)
    cfg = cls(**overrides)
    cfg.validate()
    return cfg


def load_config(path, cls=PipelineConfig):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), cls)


def config_to_text(cfg, cls=None) -> str:
    """Serialize a config back to key=value lines (checkpoint echo format)."""
    cls = cls or type(cfg)
    lines = []
    for f in dataclasses.fields(cls):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{_FIELD_TO_KEY.get(f.name, f.name)}={value}")
    return "\n".join(lines) + "\n"


def train_config_of(cfg: TrainConfig) -> TrainConfig:
    """Project any config down to the bare TrainConfig fields."""
    values = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(TrainConfig)}
    return TrainConfig(**values)

"""GGCK checkpoint serialization.

Layout (all integers little-endian):

    magic  b"GGCK"
    u32    format version (1)
    u32    byte length of the TrainConfig echo, then that many UTF-8 bytes
           (key=value lines, parseable by :func:`gesturegen.config.parse_config`)
    u32    meta entry count; per entry: u16 key length, key bytes,
           u32 value length, value bytes (UTF-8)
    u32    tensor count; per tensor: u16 name length, name bytes,
           u8 rank, u32 per dimension, then float32 data

Tensors cover both networks' parameters, the standardization statistics,
and the Adam moments (keyed by parameter name), so a save/load round trip
is bit-exact including optimizer state.
"""

from __future__ import annotations

import io
import struct

import numpy as np
import torch

from .config import TrainConfig, config_to_text, parse_config
from .errors import CheckpointError, ShapeError
from .models import Normalization
from .training import TrainState, init_train_state

_MAGIC = b"GGCK"
_VERSION = 1


def _write_str(fh, text: str, fmt: str) -> None:
    data = text.encode("utf-8")
    fh.write(struct.pack(fmt, len(data)))
    fh.write(data)


def _write_tensor(fh, name: str, array: np.ndarray) -> None:
    array = np.asarray(array, dtype="<f4")  # asarray keeps 0-d scalars 0-d
    _write_str(fh, name, "<H")
    fh.write(struct.pack("<B", array.ndim))
    for dim in array.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(array.tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint (wanted {n} bytes, got {len(data)})")
    return data


def _read_str(fh, fmt: str) -> str:
    (length,) = struct.unpack(fmt, _read_exact(fh, struct.calcsize(fmt)))
    return _read_exact(fh, length).decode("utf-8")


def _read_tensor(fh) -> tuple[str, np.ndarray]:
    name = _read_str(fh, "<H")
    (rank,) = struct.unpack("<B", _read_exact(fh, 1))
    shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank)) if rank else ()
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4").reshape(shape)
    return name, data.astype(np.float32)


def _optimizer_tensors(prefix: str, module, optimizer) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    params = list(module.parameters())
    names = [name for name, _ in module.named_parameters()]
    state = optimizer.state_dict()["state"]
    for i, name in enumerate(names):
        if i not in state:
            continue
        entry = state[i]
        tensors[f"opt.{prefix}.{name}.step"] = np.asarray(
            entry["step"], dtype=np.float32
        ).reshape(())
        tensors[f"opt.{prefix}.{name}.exp_avg"] = entry["exp_avg"].numpy()
        tensors[f"opt.{prefix}.{name}.exp_avg_sq"] = entry["exp_avg_sq"].numpy()
    assert len(params) == len(names)
    return tensors


def save_checkpoint(state: TrainState, path) -> None:
    """Write a GGCK checkpoint; load_checkpoint(save_checkpoint(x)) == x."""
    tensors: dict[str, np.ndarray] = {}
    for name, p in state.generator.named_parameters():
        tensors[f"gen.{name}"] = p.detach().numpy()
    for name, p in state.discriminator.named_parameters():
        tensors[f"disc.{name}"] = p.detach().numpy()
    tensors["norm.feat_mean"] = state.norm.feat_mean
    tensors["norm.feat_std"] = state.norm.feat_std
    tensors["norm.pose_mean"] = state.norm.pose_mean
    tensors["norm.pose_std"] = state.norm.pose_std
    tensors.update(_optimizer_tensors("g", state.generator, state.opt_g))
    tensors.update(_optimizer_tensors("d", state.discriminator, state.opt_d))

    meta = {
        "epoch": str(state.epoch),
        "best_val": repr(state.best_val),
        "skeleton_bvh": state.skeleton_bvh,
    }

    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", _VERSION))
    _write_str(buf, config_to_text(state.cfg, TrainConfig), "<I")
    buf.write(struct.pack("<I", len(meta)))
    for key, value in meta.items():
        _write_str(buf, key, "<H")
        _write_str(buf, value, "<I")
    buf.write(struct.pack("<I", len(tensors)))
    for name, array in tensors.items():
        _write_tensor(buf, name, array)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _load_raw(path):
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"cannot open checkpoint {path}: {exc}") from exc
    with fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != _VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        cfg_text = _read_str(fh, "<I")
        (n_meta,) = struct.unpack("<I", _read_exact(fh, 4))
        meta = {}
        for _ in range(n_meta):
            key = _read_str(fh, "<H")
            meta[key] = _read_str(fh, "<I")
        (n_tensors,) = struct.unpack("<I", _read_exact(fh, 4))
        tensors = {}
        for _ in range(n_tensors):
            name, array = _read_tensor(fh)
            tensors[name] = array
    return cfg_text, meta, tensors


def _restore_module(prefix: str, module, tensors) -> None:
    for name, p in module.named_parameters():
        key = f"{prefix}.{name}"
        if key not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor {key!r}")
        stored = tensors[key]
        if tuple(stored.shape) != tuple(p.shape):
            raise ShapeError(
                f"tensor {key!r} has shape {tuple(stored.shape)}, "
                f"model expects {tuple(p.shape)}"
            )
        with torch.no_grad():
            p.copy_(torch.from_numpy(stored.copy()))


def _restore_optimizer(prefix: str, module, optimizer, tensors) -> None:
    names = [name for name, _ in module.named_parameters()]
    state = {}
    for i, name in enumerate(names):
        step_key = f"opt.{prefix}.{name}.step"
        if step_key not in tensors:
            continue
        state[i] = {
            "step": torch.tensor(float(tensors[step_key])),
            "exp_avg": torch.from_numpy(tensors[f"opt.{prefix}.{name}.exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(
                tensors[f"opt.{prefix}.{name}.exp_avg_sq"].copy()
            ),
        }
    if state:
        sd = optimizer.state_dict()
        sd["state"] = state
        optimizer.load_state_dict(sd)


def load_checkpoint(path, cfg: TrainConfig | None = None) -> TrainState:
    """Rebuild a TrainState from a GGCK file.

    With ``cfg`` given, the models are built from it and every stored tensor
    must match its shape (a mismatched ablation flag raises
    :class:`ShapeError` naming the tensor); otherwise the echoed config is
    used.
    """
    cfg_text, meta, tensors = _load_raw(path)
    echoed = parse_config(cfg_text, TrainConfig)
    cfg = cfg if cfg is not None else echoed

    state = init_train_state(cfg, Normalization(
        feat_mean=tensors["norm.feat_mean"],
        feat_std=tensors["norm.feat_std"],
        pose_mean=tensors["norm.pose_mean"],
        pose_std=tensors["norm.pose_std"],
    ), skeleton_bvh=meta.get("skeleton_bvh", ""))
    _restore_module("gen", state.generator, tensors)
    _restore_module("disc", state.discriminator, tensors)
    _restore_optimizer("g", state.generator, state.opt_g, tensors)
    _restore_optimizer("d", state.discriminator, state.opt_d, tensors)
    state.epoch = int(meta.get("epoch", "0"))
    state.best_val = float(meta.get("best_val", "inf"))
    return state

"""Loss functions, dataset splitting, and the adversarial training loop.

The generator loss is the weighted sum ``alpha * mse + beta * continuity +
lam * adversarial``: pose mean-squared error, mean-squared difference of the
frame-to-frame speed sequences, and the negated mean discriminator score on
generated chunks. The discriminator minimizes mean(fake) - mean(real).

Each batch performs one discriminator update followed by one generator
update (teacher-forced FiLM context). Reference mode is single-threaded and
bit-deterministic given the seed.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import torch

from .config import TrainConfig
from .errors import InvalidInputError, NumericalError
from .models import (
    Discriminator,
    Generator,
    ModelDims,
    Normalization,
    init_params,
    sliding_windows,
)

TRAIN_FRACTION = 0.84
VAL_FRACTION = 0.074


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def generator_loss(gen, ref, d_scores, cfg: TrainConfig):
    """Three-term generator loss on pose sequences.

    ``gen``/``ref`` are (..., T, pose) tensors; speeds are first differences
    over the frame axis. Returns (total, mse, continuity, adversarial).
    """
    gen = torch.as_tensor(gen)
    ref = torch.as_tensor(ref)
    d_scores = torch.as_tensor(d_scores)
    if gen.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(gen.shape)} vs {tuple(ref.shape)}")
    if gen.ndim < 2:
        raise InvalidInputError("pose sequences must be at least (T, pose)")
    if d_scores.numel() == 0:
        raise InvalidInputError("empty discriminator score batch")

    mse = ((gen - ref) ** 2).mean()
    if gen.shape[-2] >= 2:
        speed_gen = torch.diff(gen, dim=-2)
        speed_ref = torch.diff(ref, dim=-2)
        continuity = ((speed_ref - speed_gen) ** 2).mean()
    else:
        continuity = gen.new_zeros(())
    adversarial = -d_scores.mean()
    total = cfg.alpha * mse + cfg.beta * continuity + cfg.lam * adversarial
    return total, mse, continuity, adversarial


def discriminator_loss(d_fake, d_real):
    """mean(fake scores) - mean(real scores)."""
    d_fake = torch.as_tensor(d_fake)
    d_real = torch.as_tensor(d_real)
    if d_fake.numel() == 0 or d_real.numel() == 0:
        raise InvalidInputError("empty score batch")
    return d_fake.mean() - d_real.mean()


# ---------------------------------------------------------------------------
# Dataset splitting
# ---------------------------------------------------------------------------


@dataclass
class DatasetSplit:
    """Disjoint train/validation/test record lists (84% / 7.4% / 8.6%)."""

    train: list
    val: list
    test: list


def split_dataset(records, seed: int) -> DatasetSplit:
    """Greedy duration-targeted split, deterministic given the seed.

    Records need a ``duration`` attribute in seconds. They are shuffled,
    then assigned to train until it holds 84% of the total duration, to
    validation until 7.4%, and the remainder to test, so each boundary is
    off by at most one utterance.
    """
    records = list(records)
    total = sum(r.duration for r in records)
    if total <= 0:
        raise InvalidInputError("total corpus duration is zero")

    order = np.random.default_rng(seed).permutation(len(records))
    train, val, test = [], [], []
    t_train = t_val = 0.0
    for i in order:
        rec = records[i]
        if t_train < TRAIN_FRACTION * total:
            train.append(rec)
            t_train += rec.duration
        elif t_val < VAL_FRACTION * total:
            val.append(rec)
            t_val += rec.duration
        else:
            test.append(rec)
    if not val or not test:
        warnings.warn(
            "corpus too small for a proper split: validation or test is empty",
            stacklevel=2,
        )
    return DatasetSplit(train=train, val=val, test=test)


# ---------------------------------------------------------------------------
# Training data plumbing
# ---------------------------------------------------------------------------


@dataclass
class UtteranceTensors:
    """Standardized per-utterance tensors ready for chunked batching.

    ``feats`` is (T, text+audio) without noise columns, ``poses`` (T, pose),
    and ``ctx`` the (T, prev*pose) teacher-forced pose history (ground-truth
    previous poses, clamped to the first frame at the utterance start).
    """

    name: str
    feats: torch.Tensor
    poses: torch.Tensor
    ctx: torch.Tensor


def make_utterance_tensors(
    name: str, features: np.ndarray, poses: np.ndarray, norm: Normalization,
    dims: ModelDims,
) -> UtteranceTensors:
    feats = torch.as_tensor(norm.apply_features(features))
    poses_t = torch.as_tensor(norm.apply_poses(poses))
    T = poses_t.shape[0]
    history = []
    for back in range(1, dims.prev_poses + 1):
        idx = torch.clamp(torch.arange(T) - back, min=0)
        history.append(poses_t[idx])
    ctx = torch.cat(history, dim=1)
    return UtteranceTensors(name=name, feats=feats, poses=poses_t, ctx=ctx)


def list_chunks(utterances, chunk: int, stride: int) -> list[tuple[int, int]]:
    """(utterance index, start frame) pairs for chunked training samples."""
    refs = []
    for u, utt in enumerate(utterances):
        T = utt.poses.shape[0]
        for start in range(0, T - chunk + 1, stride):
            refs.append((u, start))
    return refs


@dataclass
class Batch:
    windows: torch.Tensor  # (B*chunk, window, input_dim)
    ctx: torch.Tensor      # (B*chunk, ctx_dim)
    targets: torch.Tensor  # (B, chunk, pose_dim)
    audio: torch.Tensor | None
    text: torch.Tensor | None


def assemble_batch(
    utterances, refs, dims: ModelDims, noise_rng: torch.Generator
) -> Batch:
    """Gather chunk windows, contexts, targets, and conditioning streams.

    A fresh noise vector is drawn per chunk sample and repeated over its
    window frames.
    """
    wins, ctxs, targets, audio, text = [], [], [], [], []
    for u, start in refs:
        utt = utterances[u]
        windows = sliding_windows(utt.feats, dims.window)[start : start + dims.chunk]
        noise = torch.randn(dims.noise_dim, generator=noise_rng)
        noise = noise.expand(dims.chunk, dims.window, dims.noise_dim)
        wins.append(torch.cat([windows, noise], dim=2))
        ctxs.append(utt.ctx[start : start + dims.chunk])
        targets.append(utt.poses[start : start + dims.chunk])
        frame_feats = utt.feats[start : start + dims.chunk]
        col = 0
        if dims.use_text:
            text.append(frame_feats[:, col : col + dims.text_dim])
            col += dims.text_dim
        if dims.use_audio:
            audio.append(frame_feats[:, col : col + dims.audio_dim])
    return Batch(
        windows=torch.cat(wins),
        ctx=torch.cat(ctxs),
        targets=torch.stack(targets),
        audio=torch.stack(audio) if audio else None,
        text=torch.stack(text) if text else None,
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class EpochReport:
    epoch: int
    steps: int
    l_g: float
    l_mse: float
    l_cont: float
    l_adv: float
    l_d: float
    val_mse: float

    CSV_HEADER = ("epoch", "L_G", "L_mse", "L_cont", "L_adv", "L_D", "val_mse")

    def csv_row(self):
        return (
            self.epoch,
            f"{self.l_g:.8g}",
            f"{self.l_mse:.8g}",
            f"{self.l_cont:.8g}",
            f"{self.l_adv:.8g}",
            f"{self.l_d:.8g}",
            f"{self.val_mse:.8g}",
        )


@dataclass
class TrainState:
    """Everything the training loop mutates, checkpointable as a unit."""

    generator: Generator
    discriminator: Discriminator
    norm: Normalization
    dims: ModelDims
    cfg: TrainConfig
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    epoch: int = 0
    noise_rng: torch.Generator = None
    data_rng: np.random.Generator = None
    skeleton_bvh: str = ""
    best_val: float = float("inf")


def init_train_state(
    cfg: TrainConfig, norm: Normalization, skeleton_bvh: str = ""
) -> TrainState:
    """Seed every RNG and build freshly initialized models and optimizers."""
    torch.manual_seed(cfg.seed)
    dims = ModelDims.from_config(cfg)
    generator, discriminator = init_params(cfg.seed, dims)
    opt_g = torch.optim.Adam(
        generator.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2)
    )
    opt_d = torch.optim.Adam(
        discriminator.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2)
    )
    return TrainState(
        generator=generator,
        discriminator=discriminator,
        norm=norm,
        dims=dims,
        cfg=cfg,
        opt_g=opt_g,
        opt_d=opt_d,
        noise_rng=torch.Generator().manual_seed(cfg.seed + 1),
        data_rng=np.random.default_rng(cfg.seed + 2),
        skeleton_bvh=skeleton_bvh,
    )


def _check_finite(value: torch.Tensor, what: str, step: int) -> None:
    if not torch.isfinite(value):
        raise NumericalError(f"non-finite {what} ({value.item()}) at step {step}")


def train_epoch(
    state: TrainState, utterances, cfg: TrainConfig, max_steps: int | None = None,
    step_hook=None,
) -> EpochReport:
    """One pass over all chunks: per batch, one D update then one G update.

    ``max_steps`` caps the number of batches (for smoke runs); ``step_hook``
    receives (step, d_fake, d_real) after each batch. Returns running means
    of every loss component.
    """
    dims = state.dims
    stride = max(cfg.chunk // 2, 1)
    refs = list_chunks(utterances, cfg.chunk, stride)
    if not refs:
        raise InvalidInputError("no training chunks: utterances shorter than one chunk")
    order = state.data_rng.permutation(len(refs))

    state.generator.train()
    state.discriminator.train()
    sums = np.zeros(5)
    steps = 0
    for lo in range(0, len(order), cfg.batch):
        if max_steps is not None and steps >= max_steps:
            break
        batch_refs = [refs[i] for i in order[lo : lo + cfg.batch]]
        batch = assemble_batch(utterances, batch_refs, dims, state.noise_rng)
        B = batch.targets.shape[0]

        fake = state.generator(batch.windows, batch.ctx).view(B, cfg.chunk, dims.pose_dim)

        d_real = state.discriminator(batch.targets, batch.audio, batch.text)
        d_fake = state.discriminator(fake.detach(), batch.audio, batch.text)
        l_d = discriminator_loss(d_fake, d_real)
        _check_finite(l_d, "discriminator loss", steps)
        state.opt_d.zero_grad()
        l_d.backward()
        state.opt_d.step()
        if cfg.adversarial == "clipped-critic":
            with torch.no_grad():
                for p in state.discriminator.parameters():
                    p.clamp_(-cfg.clip, cfg.clip)

        d_scores = state.discriminator(fake, batch.audio, batch.text)
        total, mse, cont, adv = generator_loss(fake, batch.targets, d_scores, cfg)
        _check_finite(total, "generator loss", steps)
        state.opt_g.zero_grad()
        total.backward()
        state.opt_g.step()

        sums += [total.item(), mse.item(), cont.item(), adv.item(), l_d.item()]
        steps += 1
        if step_hook is not None:
            step_hook(steps, d_fake.detach(), d_real.detach())

    state.epoch += 1
    means = sums / max(steps, 1)
    return EpochReport(
        epoch=state.epoch,
        steps=steps,
        l_g=means[0],
        l_mse=means[1],
        l_cont=means[2],
        l_adv=means[3],
        l_d=means[4],
        val_mse=float("nan"),
    )


def validation_mse(state: TrainState, utterances) -> float:
    """Teacher-forced pose MSE over whole validation utterances (eval mode)."""
    if not utterances:
        return float("nan")
    dims = state.dims
    state.generator.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for utt in utterances:
            windows = sliding_windows(utt.feats, dims.window)
            noise = torch.randn(dims.noise_dim, generator=state.noise_rng)
            noise = noise.expand(windows.shape[0], dims.window, dims.noise_dim)
            pred = state.generator(torch.cat([windows, noise], dim=2), utt.ctx)
            total += ((pred - utt.poses) ** 2).sum().item()
            count += utt.poses.numel()
    state.generator.train()
    return total / count


def fit(
    state: TrainState,
    train_utts,
    val_utts=(),
    epochs: int | None = None,
    max_steps: int | None = None,
    log_csv=None,
    checkpoint_path=None,
    step_hook=None,
    verbose: bool = False,
) -> list[EpochReport]:
    """Run epochs (optionally capped at ``max_steps`` total batches).

    Tracks the best validation MSE and, when ``checkpoint_path`` is given,
    keeps the best-validation checkpoint there. Appends one CSV row per
    epoch to ``log_csv`` when given.
    """
    from .checkpoint import save_checkpoint

    cfg = state.cfg
    epochs = cfg.epochs if epochs is None else epochs
    reports: list[EpochReport] = []
    writer = None
    log_fh = None
    if log_csv is not None:
        log_fh = open(log_csv, "w", newline="")
        writer = csv.writer(log_fh)
        writer.writerow(EpochReport.CSV_HEADER)
    try:
        done = 0
        while len(reports) < epochs:
            budget = None if max_steps is None else max_steps - done
            if budget is not None and budget <= 0:
                break
            report = train_epoch(state, train_utts, cfg, max_steps=budget, step_hook=step_hook)
            done += report.steps
            report.val_mse = validation_mse(state, val_utts)
            reports.append(report)
            if writer is not None:
                writer.writerow(report.csv_row())
                log_fh.flush()
            if verbose:
                print(
                    f"epoch {report.epoch}: L_G {report.l_g:.4f} "
                    f"L_mse {report.l_mse:.4f} L_D {report.l_d:.4f} "
                    f"val {report.val_mse:.4f}"
                )
            improved = report.val_mse == report.val_mse and report.val_mse < state.best_val
            if improved:
                state.best_val = report.val_mse
            if checkpoint_path is not None and (improved or not val_utts):
                save_checkpoint(state, checkpoint_path)
    finally:
        if log_fh is not None:
            log_fh.close()
    return reports

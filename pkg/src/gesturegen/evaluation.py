"""Model evaluation on test utterances and the two ablation studies.

Each evaluation sample generates gestures for a test utterance with a fresh
seeded noise vector, runs forward kinematics on both the generated and the
reference clip, and accumulates acceleration/jerk of the generated motion
plus the RMSE between the two trajectories. Results are mean +- population
std across samples.
"""

from __future__ import annotations

import csv
from dataclasses import replace

import numpy as np

from .bvh import REP_EXPMAP, MotionClip, clip_positions
from .config import PipelineConfig, TrainConfig, train_config_of
from .data import PreparedCorpus, assemble_conditioning, fit_normalization, \
    load_poses, load_training_tensors
from .errors import ConfigError, InvalidInputError
from .features import FRAME_RATE
from .metrics import MetricsReport, aggregate_samples, motion_statistics, rmse
from .models import generate_sequence
from .training import TrainState, fit, init_train_state

#: Table rows of the framework ablation, in reporting order.
FRAMEWORK_VARIANTS = (
    ("Full", {}),
    ("No Text", {"no_text": True}),
    ("No Audio", {"no_audio": True}),
    ("No GRU", {"no_gru": True}),
    ("No FiLM Conditions", {"no_film": True}),
)

#: Table rows of the audio-feature ablation.
AUDIO_VARIANTS = (
    ("MFCCs", "mfcc"),
    ("Mel Spectrogram", "mel"),
    ("Prosodic", "prosodic"),
    ("MFCCs + Prosodic", "mfcc+prosodic"),
    ("Mel Spectrogram + Prosodic", "mel+prosodic"),
)

ABLATION_KINDS = ("framework", "audio-features")


def evaluate_pairs(pairs) -> MetricsReport:
    """Metrics over (generated, reference) trajectory pairs."""
    samples = []
    for gen_traj, ref_traj in pairs:
        acc, jerk = motion_statistics(gen_traj)
        samples.append((acc, jerk, rmse(gen_traj, ref_traj)))
    return aggregate_samples(samples)


def evaluate_model(
    state: TrainState,
    corpus: PreparedCorpus,
    n_samples: int = 50,
    seed: int = 0,
    split: str = "test",
) -> MetricsReport:
    """Generate ``n_samples`` gesture clips on the test split and report.

    Test utterances are cycled; every sample draws a fresh noise vector from
    a generator seeded with ``seed``, so reruns are identical.
    """
    records = corpus.split(split)
    if not records:
        raise InvalidInputError(f"no records in split {split!r}")
    cfg = state.cfg
    dims = state.dims
    rng = np.random.default_rng(seed)
    initial_pose = state.norm.pose_mean.astype(np.float64)

    pairs = []
    for k in range(n_samples):
        record = records[k % len(records)]
        features = assemble_conditioning(record, cfg)
        ref_poses = load_poses(record)
        noise = rng.standard_normal(dims.noise_dim)
        clip = generate_sequence(state.generator, state.norm, features, noise, initial_pose)
        ref_clip = MotionClip(fps=FRAME_RATE, frames=ref_poses, rep=REP_EXPMAP)
        gen_traj = clip_positions(corpus.hierarchy, clip)
        ref_traj = clip_positions(corpus.hierarchy, ref_clip)
        pairs.append((gen_traj, ref_traj))
    return evaluate_pairs(pairs)


def variant_config(base: TrainConfig, kind: str, name: str) -> TrainConfig:
    """The TrainConfig for one named ablation row."""
    if kind == "framework":
        table = dict(FRAMEWORK_VARIANTS)
        if name not in table:
            raise ConfigError(f"unknown framework variant {name!r}")
        return replace(base, **table[name])
    if kind == "audio-features":
        table = dict(AUDIO_VARIANTS)
        if name not in table:
            raise ConfigError(f"unknown audio variant {name!r}")
        return replace(base, audio_features=table[name])
    raise ConfigError(f"unknown ablation kind {kind!r}; expected {ABLATION_KINDS}")


def run_ablation(
    kind: str,
    corpus: PreparedCorpus,
    cfg: PipelineConfig,
    epochs: int | None = None,
    n_samples: int | None = None,
    verbose: bool = False,
) -> list[tuple[str, MetricsReport]]:
    """Train and evaluate every variant of one ablation under shared seeds."""
    if kind == "framework":
        names = [name for name, _ in FRAMEWORK_VARIANTS]
    elif kind == "audio-features":
        names = [name for name, _ in AUDIO_VARIANTS]
    else:
        raise ConfigError(f"unknown ablation kind {kind!r}; expected {ABLATION_KINDS}")

    results = []
    for name in names:
        if verbose:
            print(f"[ablate] training variant: {name}")
        train_cfg = variant_config(train_config_of(cfg), kind, name)
        norm = fit_normalization(corpus, train_cfg)
        state = init_train_state(train_cfg, norm, skeleton_bvh=corpus.skeleton_text)
        train_utts = load_training_tensors(corpus, train_cfg, norm, "train")
        val_utts = load_training_tensors(corpus, train_cfg, norm, "val")
        fit(state, train_utts, val_utts, epochs=epochs, verbose=verbose)
        eval_split = "test" if corpus.split("test") else "train"
        report = evaluate_model(
            state,
            corpus,
            n_samples=n_samples if n_samples is not None else getattr(cfg, "eval_samples", 50),
            seed=cfg.seed,
            split=eval_split,
        )
        results.append((name, report))
        if verbose:
            print(f"[ablate] {name}: {report}")
    return results


def write_metrics_csv(path, rows) -> None:
    """Write (variant, MetricsReport) rows to the ablation/evaluation CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MetricsReport.CSV_HEADER)
        for variant, report in rows:
            writer.writerow(report.csv_row(variant))

"""Command-line entry point.

Subcommands mirror the pipeline: ``prepare`` (raw corpus -> feature caches +
split manifest), ``train``, ``generate`` (WAV + transcript + checkpoint ->
BVH), ``evaluate``, and ``ablate``. Exit codes: 0 success, 1 validation
error, 2 internal error. Reference mode (single-threaded, fixed seed) makes
every command reproduce byte-identical primary outputs.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .config import PipelineConfig, load_config, train_config_of
from .data import (
    extract_speech_features,
    fit_normalization,
    load_prepared,
    load_training_tensors,
    make_embedding_provider,
    prepare_corpus,
)
from .errors import GestureGenError, InvalidInputError
from .evaluation import evaluate_model, run_ablation, write_metrics_csv
from .bvh import clip_expmap_to_euler, parse_bvh, write_bvh
from .models import generate_sequence
from .training import fit, init_train_state


def _load_pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    torch.set_num_threads(max(cfg.num_threads, 1))
    return cfg


def _cmd_prepare(args) -> int:
    cfg = _load_pipeline_config(args)
    corpus = prepare_corpus(cfg, data_dir=args.data_dir, cache_dir=args.cache_dir)
    counts = {s: len(corpus.split(s)) for s in ("train", "val", "test")}
    print(
        f"prepared {len(corpus.records)} utterances into {corpus.root} "
        f"(train {counts['train']}, val {counts['val']}, test {counts['test']})"
    )
    return 0


def _cmd_train(args) -> int:
    cfg = _load_pipeline_config(args)
    corpus = load_prepared(args.cache_dir or cfg.cache_dir)
    train_cfg = train_config_of(cfg)
    if args.epochs is not None:
        train_cfg = replace(train_cfg, epochs=args.epochs)
    norm = fit_normalization(corpus, train_cfg)
    state = init_train_state(train_cfg, norm, skeleton_bvh=corpus.skeleton_text)
    train_utts = load_training_tensors(corpus, train_cfg, norm, "train")
    val_utts = load_training_tensors(corpus, train_cfg, norm, "val")

    out_dir = Path(args.out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "model.ggck"
    reports = fit(
        state,
        train_utts,
        val_utts,
        log_csv=out_dir / "training_log.csv",
        checkpoint_path=ckpt,
        verbose=True,
    )
    save_checkpoint(state, out_dir / "model_last.ggck")
    print(f"trained {len(reports)} epochs; best checkpoint at {ckpt}")
    return 0


def _cmd_generate(args) -> int:
    started = time.perf_counter()
    cfg = _load_pipeline_config(args)
    state = load_checkpoint(args.checkpoint)
    if not state.skeleton_bvh:
        raise InvalidInputError("checkpoint has no embedded skeleton; re-train with prepare")
    hierarchy, _ = parse_bvh(state.skeleton_bvh)

    provider = make_embedding_provider(cfg)
    with open(args.wav, "rb") as fh:
        wav_bytes = fh.read()
    transcript_text = Path(args.transcript).read_text(encoding="utf-8")
    text, audio = extract_speech_features(
        wav_bytes, transcript_text, provider, state.cfg.audio_features
    )
    parts = []
    if not state.cfg.no_text:
        parts.append(text)
    if not state.cfg.no_audio:
        parts.append(audio)
    features = parts[0] if len(parts) == 1 else np.hstack(parts)

    rng = np.random.default_rng(cfg.seed)
    noise = rng.standard_normal(state.dims.noise_dim)
    clip = generate_sequence(
        state.generator, state.norm, features, noise,
        state.norm.pose_mean.astype(np.float64),
    )
    euler = clip_expmap_to_euler(hierarchy, clip)
    Path(args.out).write_text(write_bvh(hierarchy, euler), encoding="utf-8")
    elapsed = time.perf_counter() - started
    print(f"wrote {clip.n_frames} frames to {args.out} in {elapsed:.2f} s total")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_pipeline_config(args)
    corpus = load_prepared(args.cache_dir or cfg.cache_dir)
    state = load_checkpoint(args.checkpoint)
    report = evaluate_model(
        state,
        corpus,
        n_samples=args.samples or cfg.eval_samples,
        seed=cfg.seed,
        split=args.split,
    )
    print(report)
    if args.out_csv:
        write_metrics_csv(args.out_csv, [("model", report)])
        print(f"wrote {args.out_csv}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_pipeline_config(args)
    corpus = load_prepared(args.cache_dir or cfg.cache_dir)
    rows = run_ablation(
        args.variant,
        corpus,
        cfg,
        epochs=args.epochs,
        n_samples=args.samples,
        verbose=True,
    )
    for name, report in rows:
        print(f"{name}: {report}")
    out_csv = args.out_csv or str(Path(cfg.out_dir) / f"ablation_{args.variant}.csv")
    Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_csv, rows)
    print(f"wrote {out_csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gesturegen",
        description="Speech-driven co-speech gesture synthesis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value pipeline config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("prepare", help="extract feature caches and the split manifest")
    common(p)
    p.add_argument("--data-dir", help="raw corpus directory (wav/json/bvh triplets)")
    p.add_argument("--cache-dir", help="output cache directory")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="train the adversarial model on a prepared cache")
    common(p)
    p.add_argument("--cache-dir", help="prepared cache directory")
    p.add_argument("--out-dir", help="checkpoint/log output directory")
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("generate", help="generate a BVH gesture clip for one utterance")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--transcript", required=True)
    p.add_argument("--out", required=True, help="output BVH path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="objective metrics on the test split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cache-dir", help="prepared cache directory")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--split", choices=("test", "val", "train"), default="test")
    p.add_argument("--out-csv", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ablate", help="run one ablation study end to end")
    common(p)
    p.add_argument("--variant", required=True, choices=("framework", "audio-features"))
    p.add_argument("--cache-dir", help="prepared cache directory")
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out-csv", default=None)
    p.set_defaults(func=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GestureGenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

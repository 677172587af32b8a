"""Corpus discovery, feature preparation, and the prepared-cache layout.

A raw corpus directory holds one ``.wav``, ``.json`` (timestamped
transcript), and ``.bvh`` file per utterance, sharing a stem. ``prepare``
extracts every feature variant once into GGF1 caches plus a split manifest:

    cache_dir/
      manifest.json            utterance list, frame counts, split labels
      skeleton.bvh             the selected 15-joint hierarchy (0 frames)
      <name>.text.ggf          (T, 768) aligned word embeddings
      <name>.mfcc.ggf          (T, 26)
      <name>.mel.ggf           (T, 26)
      <name>.prosodic.ggf      (T, 4)
      <name>.pose.ggf          (T, 45) exponential-map poses

Training and evaluation consume the cache; ablation variants re-assemble
columns from it without re-extracting.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bvh as bvhmod
from .audio import audio_features, read_wav
from .bvh import JointHierarchy, JointSelection, MotionClip, parse_bvh, write_bvh
from .config import PipelineConfig, TrainConfig
from .errors import InvalidInputError
from .features import FRAME_RATE, write_ggf, read_ggf
from .models import ModelDims, Normalization
from .textfeat import HashEmbedding, align_text_to_frames, embed_words, parse_transcript
from .training import make_utterance_tensors, split_dataset

_BASE_KINDS = ("mfcc", "mel", "prosodic")


def make_embedding_provider(cfg: PipelineConfig):
    if cfg.embeddings == "pretrained":
        from .textfeat import BertEmbedding

        return BertEmbedding(cfg.bert_model)
    return HashEmbedding(cfg.seed)


@dataclass
class RawUtterance:
    name: str
    wav: Path
    transcript: Path
    bvh: Path


def discover_corpus(data_dir) -> list[RawUtterance]:
    """Collect complete (wav, json, bvh) triplets; warn about partial ones."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise InvalidInputError(f"data directory {data_dir} does not exist")
    utterances = []
    for wav in sorted(data_dir.glob("*.wav")):
        transcript = wav.with_suffix(".json")
        motion = wav.with_suffix(".bvh")
        if not transcript.exists() or not motion.exists():
            warnings.warn(f"skipping {wav.stem}: missing transcript or motion file",
                          stacklevel=2)
            continue
        utterances.append(RawUtterance(wav.stem, wav, transcript, motion))
    if not utterances:
        raise InvalidInputError(f"no complete utterances found in {data_dir}")
    return utterances


def extract_pose_track(
    bvh_text: str, selection: JointSelection
) -> tuple[JointHierarchy, np.ndarray]:
    """BVH text -> (15-joint hierarchy, (T, 45) exponential-map poses at 20 FPS)."""
    hierarchy, clip = parse_bvh(bvh_text)
    hierarchy, clip = bvhmod.select_joints(hierarchy, clip, selection)
    clip = bvhmod.resample_fps(clip, FRAME_RATE)
    clip = bvhmod.clip_euler_to_expmap(hierarchy, clip, fix_continuity=True)
    return hierarchy, clip.frames


def extract_speech_features(
    wav_bytes: bytes, transcript_text: str, provider, kind: str
) -> tuple[np.ndarray, np.ndarray]:
    """(text (T, 768), audio (T, width)) matrices on the shared frame clock."""
    track = read_wav(wav_bytes)
    audio = audio_features(track, kind)
    transcript = parse_transcript(transcript_text)
    vectors = embed_words(transcript, provider)
    text = align_text_to_frames(transcript, vectors, audio.n_frames)
    return text.frames, audio.frames


@dataclass
class PreparedUtterance:
    name: str
    n_frames: int
    split: str
    files: dict[str, Path]

    @property
    def duration(self) -> float:
        return self.n_frames / FRAME_RATE


@dataclass
class PreparedCorpus:
    root: Path
    hierarchy: JointHierarchy
    skeleton_text: str
    records: list[PreparedUtterance]

    def split(self, name: str) -> list[PreparedUtterance]:
        return [r for r in self.records if r.split == name]


def prepare_corpus(cfg: PipelineConfig, data_dir=None, cache_dir=None) -> PreparedCorpus:
    """Extract all feature variants, split the corpus, and write the cache."""
    data_dir = Path(data_dir or cfg.data_dir)
    cache_dir = Path(cache_dir or cfg.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    selection = JointSelection.from_names(cfg.joints)
    provider = make_embedding_provider(cfg)

    hierarchy = None
    prepared: list[PreparedUtterance] = []
    for raw in discover_corpus(data_dir):
        utt_hierarchy, poses = extract_pose_track(
            raw.bvh.read_text(encoding="utf-8"), selection
        )
        if hierarchy is None:
            hierarchy = utt_hierarchy
        elif utt_hierarchy.joint_names != hierarchy.joint_names:
            raise InvalidInputError(
                f"{raw.name}: skeleton joints differ from the first utterance"
            )
        track = read_wav(raw.wav.read_bytes())
        audio_parts = {kind: audio_features(track, kind).frames for kind in _BASE_KINDS}
        transcript = parse_transcript(raw.transcript.read_text(encoding="utf-8"))
        vectors = embed_words(transcript, provider)
        text = align_text_to_frames(
            transcript, vectors, audio_parts["mfcc"].shape[0]
        ).frames

        n_frames = min(poses.shape[0], text.shape[0])
        if n_frames < 1:
            warnings.warn(f"skipping {raw.name}: empty after alignment", stacklevel=2)
            continue
        files = {}
        arrays = {"text": text, "pose": poses, **audio_parts}
        for key, arr in arrays.items():
            path = cache_dir / f"{raw.name}.{key}.ggf"
            write_ggf(path, arr[:n_frames])
            files[key] = path
        prepared.append(PreparedUtterance(raw.name, n_frames, split="", files=files))

    skeleton_text = write_bvh(
        hierarchy,
        MotionClip(fps=FRAME_RATE, frames=np.zeros((0, 3 * hierarchy.n_joints))),
    )
    (cache_dir / "skeleton.bvh").write_text(skeleton_text, encoding="utf-8")

    split = split_dataset(prepared, cfg.seed)
    for rec in split.train:
        rec.split = "train"
    for rec in split.val:
        rec.split = "val"
    for rec in split.test:
        rec.split = "test"

    manifest = {
        "version": 1,
        "fps": FRAME_RATE,
        "skeleton": "skeleton.bvh",
        "records": [
            {
                "name": r.name,
                "n_frames": r.n_frames,
                "split": r.split,
                "files": {k: p.name for k, p in r.files.items()},
            }
            for r in prepared
        ],
    }
    (cache_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    return PreparedCorpus(cache_dir, hierarchy, skeleton_text, prepared)


def load_prepared(cache_dir) -> PreparedCorpus:
    cache_dir = Path(cache_dir)
    manifest_path = cache_dir / "manifest.json"
    if not manifest_path.exists():
        raise InvalidInputError(f"{cache_dir} holds no manifest.json; run prepare first")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    skeleton_text = (cache_dir / manifest["skeleton"]).read_text(encoding="utf-8")
    hierarchy, _ = parse_bvh(skeleton_text)
    records = [
        PreparedUtterance(
            name=entry["name"],
            n_frames=entry["n_frames"],
            split=entry["split"],
            files={k: cache_dir / v for k, v in entry["files"].items()},
        )
        for entry in manifest["records"]
    ]
    return PreparedCorpus(cache_dir, hierarchy, skeleton_text, records)


def assemble_conditioning(record: PreparedUtterance, cfg: TrainConfig) -> np.ndarray:
    """(T, text+audio) conditioning matrix per the config's ablation flags."""
    parts = []
    if not cfg.no_text:
        parts.append(read_ggf(record.files["text"]))
    if not cfg.no_audio:
        audio = [read_ggf(record.files[k]) for k in cfg.audio_features.split("+")]
        parts.append(audio[0] if len(audio) == 1 else np.hstack(audio))
    return parts[0] if len(parts) == 1 else np.hstack(parts)


def load_poses(record: PreparedUtterance) -> np.ndarray:
    return read_ggf(record.files["pose"])


def fit_normalization(corpus: PreparedCorpus, cfg: TrainConfig) -> Normalization:
    """Training-set per-dimension standardization statistics."""
    train = corpus.split("train")
    if not train:
        raise InvalidInputError("prepared corpus has no training records")
    return Normalization.fit(
        [assemble_conditioning(r, cfg) for r in train],
        [load_poses(r) for r in train],
    )


def load_training_tensors(corpus: PreparedCorpus, cfg: TrainConfig,
                          norm: Normalization, split: str = "train"):
    dims = ModelDims.from_config(cfg)
    return [
        make_utterance_tensors(
            r.name, assemble_conditioning(r, cfg), load_poses(r), norm, dims
        )
        for r in corpus.split(split)
    ]

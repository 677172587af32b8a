"""Shared fixtures: hand-built BVH text, synthetic skeletons, and corpora.

All fixture text is synthesized here with plain string building so parser
tests do not depend on the package's own writer.
"""

import io
import json
import wave
from pathlib import Path

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

# ---------------------------------------------------------------------------
# BVH text builders
# ---------------------------------------------------------------------------

MINIMAL_BVH = """HIERARCHY
ROOT Hips
{
\tOFFSET 0.0 0.0 0.0
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
\tJOINT Spine
\t{
\t\tOFFSET 0.0 10.0 0.0
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tEnd Site
\t\t{
\t\t\tOFFSET 0.0 10.0 0.0
\t\t}
\t}
}
MOTION
Frames: 1
Frame Time: 0.05
0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0
"""


#: (name, parent name or None, offset, rotation order); end sites get a
#: zero offset appended automatically for leaves.
TRINITY_LIKE_JOINTS = [
    ("Hips", None, (0.0, 100.0, 0.0), "ZXY"),
    ("Spine", "Hips", (0.0, 10.0, 0.0), "ZXY"),
    ("Spine1", "Spine", (0.0, 10.0, 1.0), "ZXY"),
    ("Spine2", "Spine1", (0.0, 10.0, -1.0), "ZXY"),
    ("Spine3", "Spine2", (0.0, 10.0, 0.0), "ZXY"),
    ("Neck", "Spine3", (0.0, 8.0, 0.0), "ZXY"),
    ("Neck1", "Neck", (0.0, 5.0, 0.0), "ZXY"),
    ("Head", "Neck1", (0.0, 8.0, 1.0), "ZXY"),
    ("RightShoulder", "Spine3", (-4.0, 6.0, 0.0), "ZYX"),
    ("RightArm", "RightShoulder", (-12.0, 0.0, 0.0), "ZYX"),
    ("RightForeArm", "RightArm", (-26.0, 0.0, 0.0), "ZYX"),
    ("RightHand", "RightForeArm", (-25.0, 0.0, 0.0), "ZYX"),
    ("RightHandThumb1", "RightHand", (-3.0, 0.0, 2.0), "ZYX"),
    ("LeftShoulder", "Spine3", (4.0, 6.0, 0.0), "ZYX"),
    ("LeftArm", "LeftShoulder", (12.0, 0.0, 0.0), "ZYX"),
    ("LeftForeArm", "LeftArm", (26.0, 0.0, 0.0), "ZYX"),
    ("LeftHand", "LeftForeArm", (25.0, 0.0, 0.0), "ZYX"),
    ("LeftHandThumb1", "LeftHand", (3.0, 0.0, 2.0), "ZYX"),
    ("RightUpLeg", "Hips", (-9.0, -5.0, 0.0), "XYZ"),
    ("RightLeg", "RightUpLeg", (0.0, -40.0, 0.0), "XYZ"),
    ("RightFoot", "RightLeg", (0.0, -40.0, 0.0), "XYZ"),
    ("LeftUpLeg", "Hips", (9.0, -5.0, 0.0), "XYZ"),
    ("LeftLeg", "LeftUpLeg", (0.0, -40.0, 0.0), "XYZ"),
    ("LeftFoot", "LeftLeg", (0.0, -40.0, 0.0), "XYZ"),
]

_ORDER_TO_CHANNELS = {
    "ZXY": "Zrotation Xrotation Yrotation",
    "ZYX": "Zrotation Yrotation Xrotation",
    "XYZ": "Xrotation Yrotation Zrotation",
}


def build_bvh_text(joints, frames, frame_time=1.0 / 60.0, root_positions=None):
    """Render (name, parent, offset, order) specs plus a frame matrix as BVH.

    ``frames`` is (T, 3 * n_joints) Euler degrees in each joint's declared
    order; the root also gets Xposition Yposition Zposition channels filled
    from ``root_positions`` (zeros by default).
    """
    frames = np.asarray(frames, dtype=np.float64)
    children = {}
    for name, parent, _, _ in joints:
        children.setdefault(parent, []).append(name)
    by_name = {name: (parent, offset, order) for name, parent, offset, order in joints}

    lines = ["HIERARCHY"]

    def emit(name, depth):
        parent, offset, order = by_name[name]
        pad = "\t" * depth
        keyword = "ROOT" if parent is None else "JOINT"
        lines.append(f"{pad}{keyword} {name}")
        lines.append(f"{pad}{{")
        lines.append(f"{pad}\tOFFSET {offset[0]} {offset[1]} {offset[2]}")
        rot = _ORDER_TO_CHANNELS[order]
        if parent is None:
            lines.append(f"{pad}\tCHANNELS 6 Xposition Yposition Zposition {rot}")
        else:
            lines.append(f"{pad}\tCHANNELS 3 {rot}")
        for child in children.get(name, []):
            emit(child, depth + 1)
        if name not in children:
            lines.append(f"{pad}\tEnd Site")
            lines.append(f"{pad}\t{{")
            lines.append(f"{pad}\t\tOFFSET 0.0 1.0 0.0")
            lines.append(f"{pad}\t}}")
        lines.append(f"{pad}}}")

    emit(children[None][0], 0)
    lines.append("MOTION")
    lines.append(f"Frames: {frames.shape[0]}")
    lines.append(f"Frame Time: {frame_time:.7f}")
    if root_positions is None:
        root_positions = np.zeros((frames.shape[0], 3))
    for f in range(frames.shape[0]):
        row = list(root_positions[f]) + list(frames[f])
        lines.append(" ".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"


def smooth_rotation_frames(n_joints, n_frames, fps=60.0, seed=0, amplitude=25.0):
    """Smooth sinusoidal Euler-degree channels, (T, 3 * n_joints)."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames) / fps
    amps = rng.uniform(2.0, amplitude, size=3 * n_joints)
    freqs = rng.uniform(0.15, 0.8, size=3 * n_joints)
    phases = rng.uniform(0, 2 * np.pi, size=3 * n_joints)
    return amps * np.sin(2 * np.pi * freqs * t[:, None] + phases)


def trinity_like_bvh(n_frames=300, fps=60.0, seed=0, amplitude=25.0):
    frames = smooth_rotation_frames(len(TRINITY_LIKE_JOINTS), n_frames, fps, seed, amplitude)
    return build_bvh_text(TRINITY_LIKE_JOINTS, frames, frame_time=1.0 / fps)


# ---------------------------------------------------------------------------
# Audio / transcript builders
# ---------------------------------------------------------------------------


def wav_bytes(samples, sample_rate=16000, n_channels=1):
    """16-bit PCM WAV bytes from float samples in [-1, 1]."""
    samples = np.asarray(samples)
    ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(n_channels)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(ints.tobytes())
    return buf.getvalue()


def speechlike_samples(seconds, sample_rate=16000, seed=0):
    """Amplitude-modulated harmonic tone bursts with noise, speech-ish."""
    rng = np.random.default_rng(seed)
    n = int(seconds * sample_rate)
    t = np.arange(n) / sample_rate
    f0 = 110 + 60 * np.sin(2 * np.pi * 0.6 * t + rng.uniform(0, 6))
    phase = np.cumsum(2 * np.pi * f0 / sample_rate)
    voiced = np.sin(phase) + 0.4 * np.sin(2 * phase) + 0.2 * np.sin(3 * phase)
    envelope = 0.3 + 0.7 * np.clip(np.sin(2 * np.pi * 1.7 * t + rng.uniform(0, 6)), 0, 1)
    noise = 0.05 * rng.standard_normal(n)
    return 0.4 * envelope * voiced + noise


_VOCAB = [
    "hello", "world", "robot", "gesture", "power", "spread", "arms",
    "amazing", "story", "movie", "the", "and", "um", "uh", "kind", "of",
    "ultimate", "know", "people", "talk",
]


def transcript_json(seconds, seed=0):
    rng = np.random.default_rng(seed)
    words = []
    t = float(rng.uniform(0.05, 0.3))
    while t < seconds - 0.5:
        duration = float(rng.uniform(0.15, 0.45))
        words.append(
            {
                "word": str(rng.choice(_VOCAB)),
                "start": round(t, 3),
                "end": round(t + duration, 3),
            }
        )
        t += duration + float(rng.uniform(0.0, 0.25))
    return json.dumps(words)


def make_corpus(directory: Path, n_utterances: int, seconds: float, seed: int = 0):
    """Write a synthetic wav/json/bvh corpus; returns the directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for u in range(n_utterances):
        stem = directory / f"utt{u:03d}"
        samples = speechlike_samples(seconds, seed=seed + 31 * u)
        stem.with_suffix(".wav").write_bytes(wav_bytes(samples))
        stem.with_suffix(".json").write_text(transcript_json(seconds, seed=seed + 31 * u))
        stem.with_suffix(".bvh").write_text(
            trinity_like_bvh(n_frames=int(seconds * 60), seed=seed + 31 * u)
        )
    return directory


# ---------------------------------------------------------------------------
# Session-scoped prepared corpora
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    return make_corpus(tmp_path_factory.mktemp("corpus_small"), 6, 5.0, seed=7)


@pytest.fixture(scope="session")
def prepared_small(small_corpus_dir, tmp_path_factory):
    """Prepared 6 x 5 s corpus with splits forced to be non-empty."""
    from gesturegen.config import PipelineConfig
    from gesturegen.data import prepare_corpus

    cfg = PipelineConfig(seed=0, batch=8)
    corpus = prepare_corpus(
        cfg,
        data_dir=small_corpus_dir,
        cache_dir=tmp_path_factory.mktemp("cache_small"),
    )
    # A 6-utterance corpus greedily lands entirely in train; tests need all
    # three splits populated.
    for record, split in zip(corpus.records, ["train", "train", "train", "train", "val", "test"]):
        record.split = split
    return cfg, corpus

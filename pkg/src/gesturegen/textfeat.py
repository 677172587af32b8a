"""Transcript parsing, word embeddings, and frame alignment.

Transcripts are JSON arrays of word objects with second-resolution
timestamps: ``[{"word": "hello", "start": 0.0, "end": 0.5}, ...]``.
Words on a documented stop-word/filler list carry no semantic content and
are embedded as the fixed all-zero vector; every other word goes through an
embedding provider producing 768-dimensional vectors. Word vectors are then
upsampled to the 20 FPS frame clock using the word intervals, with the fixed
vector filling silences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import TranscriptError
from .features import FRAME_RATE, TEXT_DIM, FeatureSequence

#: Words treated as carrying no semantic information: articles, copulas,
#: pronouns, short function words, and spoken fillers.
STOP_WORDS = frozenset(
    """
    a an the and or but if so as of to in on at by for with from into onto
    is am are was were be been being do does did done have has had having
    will would shall should can could may might must
    i you he she it we they me him her us them
    my your his its our their mine yours theirs
    this that these those there here
    not no nor too very just quite rather
    uh um er erm hmm mm mhm huh eh ah oh yeah yep nah okay ok
    gonna wanna gotta kinda sorta like well right actually basically
    """.split()
)

#: Embedding for non-semantic words and unvoiced frames.
FIXED_VECTOR = np.zeros(TEXT_DIM)


def is_semantic(word: str) -> bool:
    """True when the word is not on the stop-word/filler list."""
    stripped = word.strip().strip(".,!?;:'\"()[]-").lower()
    return bool(stripped) and stripped not in STOP_WORDS


@dataclass(frozen=True)
class Word:
    text: str
    start: float
    end: float
    has_semantics: bool


@dataclass
class Transcript:
    words: list[Word]

    @property
    def texts(self) -> list[str]:
        return [w.text for w in self.words]


def parse_transcript(text: str) -> Transcript:
    """Parse and validate a timestamped transcript document.

    Word intervals must be well-formed (start < end) and listed in
    non-overlapping time order; violations raise :class:`TranscriptError`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TranscriptError(f"transcript is not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise TranscriptError("transcript document must be an array of word objects")

    words: list[Word] = []
    prev_end = -np.inf
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or not {"word", "start", "end"} <= entry.keys():
            raise TranscriptError(f"word {i}: expected keys word/start/end")
        try:
            start, end = float(entry["start"]), float(entry["end"])
        except (TypeError, ValueError):
            raise TranscriptError(f"word {i}: non-numeric timestamps") from None
        text_i = str(entry["word"])
        if end <= start:
            raise TranscriptError(f"word {i} ({text_i!r}): end {end} <= start {start}")
        if start < prev_end:
            raise TranscriptError(f"word {i} ({text_i!r}): overlaps the previous word")
        prev_end = end
        words.append(Word(text_i, start, end, is_semantic(text_i)))
    return Transcript(words)


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------


class HashEmbedding:
    """Deterministic seeded-hash word embedder for tests and offline runs.

    The vector depends on the full word sequence and the word index, so the
    same word in the same sentence position always maps to the same vector,
    mimicking a contextual encoder without model weights.
    """

    dim = TEXT_DIM

    def __init__(self, seed: int = 0):
        self.seed = seed

    def embed(self, words: list[str], index: int) -> np.ndarray:
        key = f"{self.seed}\x1f{' '.join(words)}\x1f{index}".encode()
        digest = hashlib.sha256(key).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim)


class BertEmbedding:
    """Contextual embeddings from a pretrained transformer encoder.

    Requires the optional ``transformers`` dependency and downloaded model
    weights; failures surface to the caller unchanged. Sub-word vectors of
    the target word are mean-pooled from the last hidden state.
    """

    dim = TEXT_DIM

    def __init__(self, model_name: str = "bert-base-uncased"):
        import torch  # noqa: F401  (transformers needs it at runtime)
        from transformers import AutoModel, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModel.from_pretrained(model_name)
        self._model.eval()

    def embed(self, words: list[str], index: int) -> np.ndarray:
        import torch

        encoded = self._tokenizer(words, is_split_into_words=True, return_tensors="pt")
        with torch.no_grad():
            hidden = self._model(**encoded).last_hidden_state[0]
        token_ids = [
            t for t, w in enumerate(encoded.word_ids(0)) if w == index
        ]
        if not token_ids:
            return FIXED_VECTOR.copy()
        return hidden[token_ids].mean(dim=0).numpy().astype(np.float64)


def embed_words(transcript: Transcript, provider) -> np.ndarray:
    """Per-word 768-dim vectors: provider output for semantic words, the
    fixed vector otherwise."""
    texts = transcript.texts
    out = np.zeros((len(texts), TEXT_DIM))
    for i, word in enumerate(transcript.words):
        if word.has_semantics:
            vec = np.asarray(provider.embed(texts, i), dtype=np.float64)
            if vec.shape != (TEXT_DIM,):
                raise TranscriptError(
                    f"embedding provider returned shape {vec.shape}, expected ({TEXT_DIM},)"
                )
            out[i] = vec
        else:
            out[i] = FIXED_VECTOR
    return out


def align_text_to_frames(
    transcript: Transcript, vectors: np.ndarray, n_frames: int
) -> FeatureSequence:
    """Upsample word vectors to the 20 FPS frame clock.

    Frame ``f`` (time ``f / 20`` s) carries the vector of the word whose
    half-open interval [start, end) contains that time; frames outside every
    word carry the fixed vector.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape != (len(transcript.words), TEXT_DIM):
        raise TranscriptError(
            f"expected {(len(transcript.words), TEXT_DIM)} word vectors, got {vectors.shape}"
        )
    frames = np.tile(FIXED_VECTOR, (n_frames, 1))
    w = 0
    for f in range(n_frames):
        t = f / FRAME_RATE
        while w < len(transcript.words) and transcript.words[w].end <= t:
            w += 1
        if w < len(transcript.words) and transcript.words[w].start <= t:
            frames[f] = vectors[w]
    return FeatureSequence(frames=frames, kind="text")

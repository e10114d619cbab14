"""Sentence encoders: the real transformer backend and an offline
feature-hashing stand-in with the same interface."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EncoderLoadError

DEFAULT_MODEL = "paraphrase-multilingual-MiniLM-L12-v2"
COMPACT_ENGLISH_MODEL = "all-MiniLM-L6-v2"
HASH_DIM_DEFAULT = 384


class HashingEncoder:
    """Deterministic bag-of-hashed-ngrams embedding, no model download.

    Unigrams and bigrams are hashed (blake2b) into `dim` signed buckets
    and the result is L2-normalized. Identical texts map to identical
    vectors on any platform.
    """

    def __init__(self, dim: int = HASH_DIM_DEFAULT):
        if dim < 1:
            raise EncoderLoadError(f"hash encoder dim must be >= 1, got {dim}")
        self.dim = dim

    def _features(self, text: str):
        tokens = text.lower().split()
        yield from tokens
        for a, b in zip(tokens, tokens[1:]):
            yield f"{a}\x1f{b}"

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for feature in self._features(text):
                digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
                value = int.from_bytes(digest, "little")
                bucket = value % self.dim
                sign = 1.0 if (value >> 63) & 1 else -1.0
                out[row, bucket] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out.astype(np.float32)


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers model; loading needs the model on disk
    or a reachable hub."""

    def __init__(self, model_name: str = DEFAULT_MODEL):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderLoadError(
                "sentence-transformers is not installed; install the 'st' extra "
                "or use the hash backend"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderLoadError(
                f"could not load sentence encoder {model_name!r}: {exc}"
            ) from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(
            list(texts), convert_to_numpy=True, show_progress_bar=False
        )
        return np.asarray(vectors, dtype=np.float32)


def make_encoder(backend: str, model_name: str = DEFAULT_MODEL,
                 dim: int = HASH_DIM_DEFAULT):
    if backend == "hash":
        return HashingEncoder(dim=dim)
    if backend == "sentence-transformers":
        return SentenceTransformerEncoder(model_name=model_name)
    raise EncoderLoadError(f"unknown encoder backend {backend!r}")

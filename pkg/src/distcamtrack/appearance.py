"""Appearance embeddings, per-tracker galleries, and cosine-distance scores.

A tracker's appearance model is a bounded FIFO gallery of embedding
vectors.  Similarity against a query is the minimum cosine distance over
the gallery, in [0, 2].  A synthetic embedding generator stands in for a
re-identification network: every identity owns a fixed random unit vector,
observations of it are noisy copies.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_EMBEDDING_DIM = 512
DEFAULT_GALLERY_SIZE = 20
DEFAULT_GALLERY_PERIOD = 20

_IDENTITY_STREAM = 0x1D5EED


def normalize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("cannot normalize a zero or non-finite vector")
    return vec / norm


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), in [0, 2]."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance undefined for zero vectors")
    return float(1.0 - float(a @ b) / (na * nb))


@lru_cache(maxsize=8192)
def identity_base_vector(identity_seed: int, dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Fixed unit vector owned by an identity; deterministic in the seed."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(_IDENTITY_STREAM, int(identity_seed))))
    base = normalize(rng.standard_normal(dim))
    base.flags.writeable = False
    return base


def synthetic_embedding(identity_seed: int, noise_sigma: float,
                        rng: np.random.Generator,
                        dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Noisy unit-norm observation of an identity's base vector."""
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be non-negative")
    base = identity_base_vector(identity_seed, dim)
    if noise_sigma == 0.0:
        return base.copy()
    return normalize(base + rng.normal(0.0, noise_sigma, size=dim))


def random_embedding(rng: np.random.Generator, dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Fresh random unit vector, used for clutter detections."""
    return normalize(rng.standard_normal(dim))


@dataclass
class Gallery:
    """Bounded FIFO of appearance embeddings.

    A new embedding is stored when at least ``save_period`` frames passed
    since the last store.  The first two observations are always stored so
    a fresh tracker can build its two-sample appearance model immediately.
    """

    capacity: int = DEFAULT_GALLERY_SIZE
    save_period: int = DEFAULT_GALLERY_PERIOD
    entries: deque = field(default_factory=deque)
    last_saved_frame: int | None = None

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("gallery capacity must be at least 1")
        if self.save_period < 1:
            raise ValueError("save period must be at least 1")
        self.entries = deque(self.entries, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.entries)

    def similarity(self, query: np.ndarray) -> float:
        """Minimum cosine distance between the query and the gallery."""
        if not self.entries:
            raise ValueError("similarity against an empty gallery")
        stacked = np.stack(list(self.entries))
        norms = np.linalg.norm(stacked, axis=1) * np.linalg.norm(query)
        cosines = (stacked @ np.asarray(query, dtype=float)) / norms
        return float(1.0 - cosines.max())

    def maybe_store(self, embedding: np.ndarray, frame: int) -> bool:
        """Store the embedding if the save period elapsed; True if stored."""
        due = (
            len(self.entries) < 2
            or self.last_saved_frame is None
            or frame - self.last_saved_frame >= self.save_period
        )
        if not due:
            return False
        self.entries.append(np.asarray(embedding, dtype=float))
        self.last_saved_frame = frame
        return True

    def extend(self, embeddings) -> None:
        """Append embeddings oldest-first, evicting from the front on overflow."""
        for emb in embeddings:
            self.entries.append(np.asarray(emb, dtype=float))

    def snapshot(self) -> list[np.ndarray]:
        return list(self.entries)


def appearance_similarity(query: np.ndarray, gallery: Gallery) -> float:
    return gallery.similarity(query)


def set_similarity(queries, references) -> float:
    """Minimum cosine distance over all cross pairs of two embedding sets."""
    if not len(queries) or not len(references):
        raise ValueError("set similarity needs non-empty embedding sets")
    q = np.stack([np.asarray(v, dtype=float) for v in queries])
    r = np.stack([np.asarray(v, dtype=float) for v in references])
    qn = np.linalg.norm(q, axis=1)
    rn = np.linalg.norm(r, axis=1)
    cosines = (q @ r.T) / np.outer(qn, rn)
    return float(1.0 - cosines.max())

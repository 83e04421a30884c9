"""Cosine similarities between audio embeddings and malfunction-text embeddings.

A fixed, ordered list of short texts describing common malfunctioning-machine
sound characteristics is embedded once; each sound is then scored against
every text. The raw clamped cosine values feed the prompt builders directly
(no softmax or rescaling).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateVector, DimensionMismatch, InvalidInput
from .store import as_embedding

DEFAULT_REFERENCE_TEXTS = (
    "Vibration",
    "High-frequency Squealing or Screeching",
    "Popping or Knocking Sounds",
    "Rhythmic Clicking or Tapping",
    "Grinding Sounds",
    "Irregular Patterns",
    "Low-frequency Humming",
    "Unexpected Silence",
)


def load_reference_texts(path: str | Path) -> tuple[str, ...]:
    """One text per line, UTF-8, blank lines ignored, order preserved."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    texts = tuple(line.strip() for line in lines if line.strip())
    if not texts:
        raise InvalidInput(f"reference-text file {path} contains no texts")
    return texts


@dataclass(frozen=True)
class ReferenceTextSet:
    """Ordered malfunction-characteristic texts with their embeddings."""

    texts: tuple[str, ...]
    embeddings: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.texts) == 0:
            raise InvalidInput("reference text set must contain at least one text")
        if any(not t for t in self.texts):
            raise InvalidInput("reference texts must be non-empty strings")
        if len(self.texts) != len(self.embeddings):
            raise InvalidInput(
                f"{len(self.texts)} texts but {len(self.embeddings)} embeddings"
            )
        object.__setattr__(
            self, "embeddings", tuple(as_embedding(e) for e in self.embeddings)
        )
        dims = {e.shape[0] for e in self.embeddings}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed text-embedding dimensions: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.texts)

    @classmethod
    def from_provider(cls, texts: Sequence[str], provider) -> "ReferenceTextSet":
        texts = tuple(texts)
        return cls(texts=texts, embeddings=tuple(provider.embed_text(t) for t in texts))


def cosine_similarity(a, b) -> float:
    """dot(a,b) / (||a|| ||b||), clamped to [-1, 1] against float overshoot."""
    va = as_embedding(a).astype(np.float64)
    vb = as_embedding(b).astype(np.float64)
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatch(f"dims differ: {va.shape[0]} vs {vb.shape[0]}")
    sq_a = float(va @ va)
    sq_b = float(vb @ vb)
    if sq_a == 0.0 or sq_b == 0.0:
        raise DegenerateVector("cosine similarity undefined for zero-norm vector")
    # sqrt of the product (not product of sqrts) keeps cos(v, v) == 1.0 exact
    return max(-1.0, min(1.0, float(va @ vb) / math.sqrt(sq_a * sq_b)))


@dataclass(frozen=True)
class SimilarityMatrix:
    """Row per sound, column per reference text, values in [-1, 1]."""

    row_ids: tuple[str, ...]
    col_texts: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.values) != len(self.row_ids):
            raise InvalidInput("one value row per row_id required")
        for row in self.values:
            if len(row) != len(self.col_texts):
                raise InvalidInput("every row must have one value per reference text")
            for v in row:
                if not (-1.0 <= v <= 1.0):
                    raise InvalidInput(f"similarity {v} outside [-1, 1]")

    def row(self, sample_id: str) -> tuple[float, ...]:
        return self.values[self.row_ids.index(sample_id)]


def similarity_matrix(
    sounds: Sequence[tuple[str, object]], texts: ReferenceTextSet
) -> SimilarityMatrix:
    """Cosine similarity of every sound against every reference text.

    Row and column order follow the inputs exactly; the column order later
    fixes the CSV column order in prompts.
    """
    values = tuple(
        tuple(cosine_similarity(emb, t_emb) for t_emb in texts.embeddings)
        for _, emb in sounds
    )
    return SimilarityMatrix(
        row_ids=tuple(sid for sid, _ in sounds),
        col_texts=tuple(texts.texts),
        values=values,
    )

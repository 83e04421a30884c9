"""Anomaly scoring over a reference store of normal-sound embeddings.

The score of a query is the arithmetic mean of the Euclidean distances to
its k nearest reference embeddings. A decision threshold is calibrated as
an empirical percentile of leave-one-out scores over the training store,
so only normal training data is ever needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateVector, InsufficientReferences, InvalidInput
from .store import EmbeddingStore, as_embedding, knn_search

DECISION_NORMAL = "normal"
DECISION_ANOMALOUS = "anomalous"
DECISION_UNSCORED = "unscored"


@dataclass(frozen=True)
class ScoringConfig:
    """Knobs for scoring and threshold calibration.

    normalize applies L2 normalization to both query and references before
    the Euclidean search; off by default (raw provider embeddings).
    """

    k: int = 4
    threshold_percentile: float = 0.90
    normalize: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInput(f"k must be >= 1, got {self.k}")
        if not (0.0 < self.threshold_percentile <= 1.0):
            raise InvalidInput(
                f"threshold_percentile must be in (0, 1], got {self.threshold_percentile}"
            )

    def echo(self) -> dict:
        return {
            "k": self.k,
            "threshold_percentile": self.threshold_percentile,
            "normalize": self.normalize,
        }


@dataclass(frozen=True)
class AnomalyResult:
    sample_id: str
    score: float
    neighbor_ids: tuple[str, ...]
    threshold: Optional[float] = None
    decision: str = DECISION_UNSCORED


def _prepare_query(query, config: ScoringConfig) -> np.ndarray:
    q = as_embedding(query)
    if config.normalize:
        norm = float(np.linalg.norm(q.astype(np.float64)))
        if norm == 0.0:
            raise DegenerateVector("cannot normalize zero-norm query")
        q = (q.astype(np.float64) / norm).astype(np.float32)
    return q


def anomaly_score(
    query,
    train_store: EmbeddingStore,
    config: ScoringConfig = ScoringConfig(),
    sample_id: str = "query",
) -> AnomalyResult:
    """Score one query: mean distance to the k nearest reference embeddings.

    Neighbor ids come straight from knn_search, same order, so downstream
    captioning sees exactly the references that produced the score.
    """
    store = train_store.l2_normalized() if config.normalize else train_store
    q = _prepare_query(query, config)
    neighbors = knn_search(store, q, config.k)
    score = float(np.mean(np.asarray([d for _, d in neighbors], dtype=np.float64)))
    return AnomalyResult(
        sample_id=sample_id,
        score=score,
        neighbor_ids=tuple(sid for sid, _ in neighbors),
    )


def leave_one_out_scores(
    train_store: EmbeddingStore, config: ScoringConfig = ScoringConfig()
) -> list[float]:
    """Anomaly score of each training sample against the store minus itself."""
    n = len(train_store)
    if n < config.k + 1:
        raise InsufficientReferences(
            f"leave-one-out with k={config.k} needs >= {config.k + 1} records, have {n}"
        )
    store = train_store.l2_normalized() if config.normalize else train_store
    m = store.matrix.astype(np.float64)
    scores = []
    for i in range(n):
        diff = m - m[i]
        dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        dists[i] = np.inf
        smallest = np.partition(dists, config.k - 1)[: config.k]
        scores.append(float(smallest.mean()))
    return scores


def percentile_linear(values: Sequence[float], fraction: float) -> float:
    """Empirical percentile with linear interpolation between order statistics."""
    if not (0.0 < fraction <= 1.0):
        raise InvalidInput(f"fraction must be in (0, 1], got {fraction}")
    vals = sorted(float(v) for v in values)
    if not vals:
        raise InvalidInput("percentile of empty value list")
    pos = (len(vals) - 1) * fraction
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    if lo == hi:
        return vals[lo]
    frac = pos - lo
    return vals[lo] * (1.0 - frac) + vals[hi] * frac


def calibrate_threshold(
    train_store: EmbeddingStore, config: ScoringConfig = ScoringConfig()
) -> float:
    """Threshold = configured percentile of leave-one-out training scores."""
    return percentile_linear(
        leave_one_out_scores(train_store, config), config.threshold_percentile
    )


def classify(result: AnomalyResult, threshold: float) -> AnomalyResult:
    """Attach threshold and decision; score strictly above threshold = anomalous."""
    decision = DECISION_ANOMALOUS if result.score > threshold else DECISION_NORMAL
    return AnomalyResult(
        sample_id=result.sample_id,
        score=result.score,
        neighbor_ids=result.neighbor_ids,
        threshold=float(threshold),
        decision=decision,
    )

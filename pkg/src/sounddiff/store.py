"""Embedding persistence and exact k-NN search.

A store is an immutable, in-memory collection of fixed-dimension float32
embedding vectors with per-sample metadata. On disk it is a UTF-8 JSON
manifest plus a headerless binary blob of little-endian float32 vectors,
so a save/load round trip is bit-exact on every platform.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    CorruptStore,
    DegenerateVector,
    DimensionMismatch,
    DuplicateId,
    InsufficientReferences,
    InvalidInput,
    NotFound,
    StorageError,
    UnsupportedFormat,
)
from .util import atomic_write_bytes, atomic_write_text, dump_json

DTYPE_TAG = "f32-le"
LABELS = ("normal", "anomalous", "unknown")
SPLITS = ("train", "test")


def as_embedding(values) -> np.ndarray:
    """Validate and convert to a finite 1-D float32 vector."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise InvalidInput(f"embedding must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("embedding contains NaN or Inf components")
    return arr


@dataclass(frozen=True)
class SampleRecord:
    """One embedded sound with its dataset metadata."""

    sample_id: str
    machine_type: str
    machine_id: str
    label: str
    split: str
    source_path: str
    embedding: np.ndarray

    def __post_init__(self):
        if not self.sample_id:
            raise InvalidInput("sample_id must be non-empty")
        if self.label not in LABELS:
            raise InvalidInput(f"label must be one of {LABELS}, got {self.label!r}")
        if self.split not in SPLITS:
            raise InvalidInput(f"split must be one of {SPLITS}, got {self.split!r}")
        object.__setattr__(self, "embedding", as_embedding(self.embedding))

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])


@dataclass(frozen=True)
class StoreManifest:
    """On-disk description of a store: JSON manifest + companion blob."""

    dim: int
    count: int
    dtype: str
    blob_file: str
    records: tuple[dict, ...]


class EmbeddingStore:
    """Immutable collection of SampleRecords with a stacked embedding matrix.

    Concurrent readers are safe; mutation happens only by building a new
    store (save_store / filter / l2_normalized all return fresh objects).
    """

    def __init__(self, records: Iterable[SampleRecord], dim: Optional[int] = None):
        recs = tuple(records)
        seen: set[str] = set()
        for r in recs:
            if r.sample_id in seen:
                raise DuplicateId(f"duplicate sample_id {r.sample_id!r}")
            seen.add(r.sample_id)
        if recs:
            dims = {r.dim for r in recs}
            if len(dims) > 1:
                raise DimensionMismatch(f"mixed embedding dimensions in store: {sorted(dims)}")
            inferred = recs[0].dim
            if dim is not None and dim != inferred:
                raise DimensionMismatch(f"declared dim {dim} != record dim {inferred}")
            dim = inferred
        elif dim is None:
            raise InvalidInput("empty store needs an explicit dim")
        self._records = recs
        self._dim = int(dim)
        self._ids = tuple(r.sample_id for r in recs)
        self._by_id = {r.sample_id: r for r in recs}
        if recs:
            self._matrix = np.stack([r.embedding for r in recs]).astype(np.float32)
        else:
            self._matrix = np.zeros((0, self._dim), dtype=np.float32)
        self._normalized: Optional[EmbeddingStore] = None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def records(self) -> tuple[SampleRecord, ...]:
        return self._records

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def matrix(self) -> np.ndarray:
        """(count, dim) float32 view of all embeddings, row i = records[i]."""
        return self._matrix

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._by_id

    def get(self, sample_id: str) -> SampleRecord:
        try:
            return self._by_id[sample_id]
        except KeyError:
            raise NotFound(f"sample_id {sample_id!r} not in store") from None

    def embedding(self, sample_id: str) -> np.ndarray:
        return self.get(sample_id).embedding

    def filter(
        self,
        machine_type: Optional[str] = None,
        machine_id: Optional[str] = None,
        split: Optional[str] = None,
        label: Optional[str] = None,
    ) -> "EmbeddingStore":
        """View of records matching every given field (None = no constraint)."""
        out = []
        for r in self._records:
            if machine_type is not None and r.machine_type != machine_type:
                continue
            if machine_id is not None and r.machine_id != machine_id:
                continue
            if split is not None and r.split != split:
                continue
            if label is not None and r.label != label:
                continue
            out.append(r)
        return EmbeddingStore(out, dim=self._dim)

    def without(self, sample_id: str) -> "EmbeddingStore":
        return EmbeddingStore(
            [r for r in self._records if r.sample_id != sample_id], dim=self._dim
        )

    def l2_normalized(self) -> "EmbeddingStore":
        """Store with every embedding scaled to unit L2 norm (cached)."""
        if self._normalized is None:
            out = []
            for r in self._records:
                norm = float(np.linalg.norm(r.embedding.astype(np.float64)))
                if norm == 0.0:
                    raise DegenerateVector(
                        f"cannot normalize zero vector for sample {r.sample_id!r}"
                    )
                out.append(
                    SampleRecord(
                        sample_id=r.sample_id,
                        machine_type=r.machine_type,
                        machine_id=r.machine_id,
                        label=r.label,
                        split=r.split,
                        source_path=r.source_path,
                        embedding=(r.embedding.astype(np.float64) / norm).astype(np.float32),
                    )
                )
            self._normalized = EmbeddingStore(out, dim=self._dim)
        return self._normalized


def knn_search(
    store: EmbeddingStore, query, k: int
) -> list[tuple[str, float]]:
    """Exact k nearest neighbors by Euclidean distance.

    Returns k (sample_id, distance) pairs, ascending by distance with ties
    broken by ascending sample_id, so the result is independent of record
    insertion order. Plain linear scan: at the dataset scale this pipeline
    targets, exactness matters more than index acceleration.
    """
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    if k > len(store):
        raise InsufficientReferences(f"k={k} exceeds store size {len(store)}")
    q = as_embedding(query)
    if q.shape[0] != store.dim:
        raise DimensionMismatch(f"query dim {q.shape[0]} != store dim {store.dim}")
    diff = store.matrix.astype(np.float64) - q.astype(np.float64)
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.lexsort((np.asarray(store.sample_ids), dists))
    return [(store.sample_ids[i], float(dists[i])) for i in order[:k]]


def save_store(
    records: Sequence[SampleRecord],
    manifest_path: str | Path,
    dim: Optional[int] = None,
) -> StoreManifest:
    """Write manifest JSON + binary blob; returns the manifest written.

    The blob is the concatenation of each record's little-endian float32
    vector in record order, no header; offsets are byte positions.
    """
    store = EmbeddingStore(records, dim=dim)  # validates dims and id uniqueness
    manifest_path = Path(manifest_path)
    blob_file = manifest_path.stem + ".bin"
    width = store.dim * 4
    record_meta = tuple(
        {
            "sample_id": r.sample_id,
            "machine_type": r.machine_type,
            "machine_id": r.machine_id,
            "label": r.label,
            "split": r.split,
            "source_path": r.source_path,
            "offset": i * width,
        }
        for i, r in enumerate(store.records)
    )
    manifest = StoreManifest(
        dim=store.dim,
        count=len(store),
        dtype=DTYPE_TAG,
        blob_file=blob_file,
        records=record_meta,
    )
    blob = store.matrix.astype("<f4").tobytes()
    atomic_write_bytes(manifest_path.parent / blob_file, blob)
    atomic_write_text(
        manifest_path,
        dump_json(
            {
                "dim": manifest.dim,
                "count": manifest.count,
                "dtype": manifest.dtype,
                "blob_file": manifest.blob_file,
                "records": list(record_meta),
            }
        ),
    )
    return manifest


def load_store(manifest_path: str | Path) -> EmbeddingStore:
    """Load a store written by save_store, verifying manifest/blob consistency."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StorageError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptStore(f"manifest {manifest_path} is not valid JSON: {exc}") from exc

    dtype = doc.get("dtype")
    if dtype != DTYPE_TAG:
        raise UnsupportedFormat(f"unknown dtype tag {dtype!r} (expected {DTYPE_TAG!r})")
    dim = int(doc["dim"])
    count = int(doc["count"])
    meta = doc.get("records", [])
    if count != len(meta):
        raise CorruptStore(f"manifest count={count} but {len(meta)} records listed")

    blob_path = manifest_path.parent / doc["blob_file"]
    try:
        blob = blob_path.read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read blob {blob_path}: {exc}") from exc
    expected = count * dim * 4
    if len(blob) != expected:
        raise CorruptStore(
            f"blob size {len(blob)} != count*dim*4 = {expected} ({blob_path})"
        )

    width = dim * 4
    vectors = np.frombuffer(blob, dtype="<f4").reshape(count, dim) if count else None
    records = []
    for i, m in enumerate(meta):
        if int(m["offset"]) != i * width:
            raise CorruptStore(
                f"record {m.get('sample_id')!r} offset {m['offset']} != {i * width}"
            )
        vec = np.ascontiguousarray(vectors[i])
        if not np.all(np.isfinite(vec)):
            raise CorruptStore(f"non-finite embedding for sample {m.get('sample_id')!r}")
        records.append(
            SampleRecord(
                sample_id=m["sample_id"],
                machine_type=m["machine_type"],
                machine_id=m["machine_id"],
                label=m["label"],
                split=m["split"],
                source_path=m["source_path"],
                embedding=vec,
            )
        )
    return EmbeddingStore(records, dim=dim)

"""Embedding, caption-decoder, and LLM completion providers.

Three kinds share one client-side surface:
  mock  - deterministic hash-derived vectors and canned text; the whole
          pipeline runs offline with these.
  file  - precomputed embeddings looked up from a store manifest.
  http  - an inference sidecar (embed/decode) or a chat-style LLM endpoint.

embed_* calls are referentially transparent within a session: same input,
same output. HTTP transport failures are retried; well-formed error
responses are not.
"""
from __future__ import annotations

import hashlib
import logging
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import requests

from .errors import (
    AuthError,
    DimensionMismatch,
    InvalidInput,
    NotFound,
    ProviderError,
)
from .store import EmbeddingStore, as_embedding, load_store

logger = logging.getLogger(__name__)

DEFAULT_MOCK_DIM = 16


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "mock"
    base_url: Optional[str] = None
    api_key_env: Optional[str] = None
    model_name: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 2
    max_inflight: int = 4

    def __post_init__(self):
        if self.kind not in ("file", "http", "mock"):
            raise InvalidInput(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise InvalidInput("http provider requires base_url")
        if self.max_inflight < 1:
            raise InvalidInput("max_inflight must be >= 1")


class EmbeddingProvider:
    """Maps audio references and texts to fixed-dimension embeddings."""

    def embed_audio(self, audio_ref: str) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, text: str) -> np.ndarray:
        raise NotImplementedError


class DecoderProvider:
    """Generates a caption for an embedding, honoring a conditioning prefix."""

    def decode_caption(self, embedding, prefix: str) -> str:
        raise NotImplementedError


class LlmProvider:
    """Chat-style completion: one system message plus one user message."""

    def llm_complete(self, system_prefix: str, body: str) -> str:
        raise NotImplementedError


def _hash_unit_vector(key: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-random unit vector from a string key.

    Components come straight from SHA-256 output expanded with a counter,
    so the mapping is stable across runs, platforms, and library versions.
    """
    raw = bytearray()
    counter = 0
    while len(raw) < dim * 4:
        raw += hashlib.sha256(f"{key}#{counter}".encode("utf-8")).digest()
        counter += 1
    ints = struct.unpack(f"<{dim}I", bytes(raw[: dim * 4]))
    vec = np.asarray([(v / 2**32) * 2.0 - 1.0 for v in ints], dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:  # unreachable in practice, keeps the contract airtight
        vec[0] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)


class MockEmbeddingProvider(EmbeddingProvider):
    """Hash-of-input unit vectors; distinct inputs give distinct vectors."""

    def __init__(self, dim: int = DEFAULT_MOCK_DIM):
        if dim < 1:
            raise InvalidInput(f"dim must be >= 1, got {dim}")
        self.dim = dim

    def embed_audio(self, audio_ref: str) -> np.ndarray:
        return _hash_unit_vector(f"audio:{audio_ref}", self.dim)

    def embed_text(self, text: str) -> np.ndarray:
        return _hash_unit_vector(f"text:{text}", self.dim)


class MockDecoderProvider(DecoderProvider):
    def decode_caption(self, embedding, prefix: str) -> str:
        emb = as_embedding(embedding)
        digest = hashlib.sha256(emb.astype("<f4").tobytes()).hexdigest()[:8]
        if prefix:
            return f"{prefix} sample-{digest}"
        return f"sample-{digest}"


class MockLlmProvider(LlmProvider):
    def llm_complete(self, system_prefix: str, body: str) -> str:
        head = " ".join(body.split()[:10])
        return f"This sound is {head}" if head else "This sound is"


class FileEmbeddingProvider(EmbeddingProvider):
    """Precomputed embeddings from a store manifest.

    Audio lookups are keyed by source_path (falling back to sample_id);
    text lookups by sample_id. Vectors are returned bit-exactly as stored.
    """

    def __init__(self, manifest_path: str | Path):
        store: EmbeddingStore = load_store(manifest_path)
        self.dim = store.dim
        self._by_source = {}
        self._by_id = {}
        for r in store.records:
            self._by_source.setdefault(r.source_path, r.embedding)
            self._by_id[r.sample_id] = r.embedding

    def embed_audio(self, audio_ref: str) -> np.ndarray:
        ref = str(audio_ref)
        if ref in self._by_source:
            return self._by_source[ref]
        if ref in self._by_id:
            return self._by_id[ref]
        raise NotFound(f"no precomputed embedding for {ref!r}")

    def embed_text(self, text: str) -> np.ndarray:
        if text in self._by_id:
            return self._by_id[text]
        raise NotFound(f"no precomputed embedding for text {text!r}")


def _transport_request(method: str, url: str, config: ProviderConfig,
                       inflight: Optional[threading.BoundedSemaphore] = None,
                       **kwargs):
    """HTTP request with retries on transport failures only.

    An optional semaphore bounds concurrent in-flight requests per provider.
    """
    attempts = config.max_retries + 1
    last_exc: Optional[Exception] = None
    for attempt in range(attempts):
        try:
            logger.debug("%s %s attempt %d payload=%r", method, url, attempt + 1,
                         kwargs.get("json"))
            if inflight is not None:
                inflight.acquire()
            try:
                resp = requests.request(method, url, timeout=config.timeout, **kwargs)
            finally:
                if inflight is not None:
                    inflight.release()
            logger.debug("%s %s -> %d %r", method, url, resp.status_code,
                         resp.text[:500])
            return resp
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_exc = exc
    raise ProviderError(
        f"{method} {url} failed after {attempts} attempts: {last_exc}"
    ) from last_exc


def _error_detail(resp) -> str:
    try:
        doc = resp.json()
        if isinstance(doc, dict) and "error" in doc:
            return str(doc["error"])
    except ValueError:
        pass
    return resp.text[:200]


class HttpEmbeddingProvider(EmbeddingProvider, DecoderProvider):
    """Client for the inference sidecar HTTP contract.

    Local audio files are shipped base64-encoded; non-local references are
    passed through as paths for the sidecar to resolve. Embedding responses
    are cached per input for the session, and the first response pins the
    expected dimension.
    """

    def __init__(self, config: ProviderConfig):
        if config.kind != "http":
            raise InvalidInput("HttpEmbeddingProvider requires an http config")
        self.config = config
        self.base_url = config.base_url.rstrip("/")
        self._inflight = threading.BoundedSemaphore(config.max_inflight)
        self._dim: Optional[int] = None
        self._audio_cache: dict[str, np.ndarray] = {}
        self._text_cache: dict[str, np.ndarray] = {}

    def _post(self, path: str, payload: dict) -> dict:
        resp = _transport_request(
            "POST", f"{self.base_url}{path}", self.config,
            inflight=self._inflight, json=payload,
        )
        if resp.status_code != 200:
            raise ProviderError(
                f"sidecar {path} returned {resp.status_code}: {_error_detail(resp)}"
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(f"sidecar {path} returned invalid JSON") from exc

    def _check_dim(self, vec: np.ndarray) -> np.ndarray:
        if self._dim is None:
            self._dim = int(vec.shape[0])
        elif vec.shape[0] != self._dim:
            raise DimensionMismatch(
                f"provider dimension drifted: {vec.shape[0]} != {self._dim}"
            )
        return vec

    def embed_audio(self, audio_ref: str) -> np.ndarray:
        ref = str(audio_ref)
        if ref in self._audio_cache:
            return self._audio_cache[ref]
        path = Path(ref)
        if path.is_file():
            import base64

            payload = {"audio_b64": base64.b64encode(path.read_bytes()).decode("ascii")}
        else:
            payload = {"path": ref}
        doc = self._post("/embed/audio", payload)
        vec = self._check_dim(as_embedding(doc.get("embedding")))
        self._audio_cache[ref] = vec
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        if text in self._text_cache:
            return self._text_cache[text]
        doc = self._post("/embed/text", {"text": text})
        vec = self._check_dim(as_embedding(doc.get("embedding")))
        self._text_cache[text] = vec
        return vec

    def decode_caption(self, embedding, prefix: str) -> str:
        emb = as_embedding(embedding)
        doc = self._post(
            "/decode", {"embedding": [float(v) for v in emb], "prefix": prefix}
        )
        caption = doc.get("caption")
        if not isinstance(caption, str):
            raise ProviderError("sidecar /decode response missing caption")
        return caption

    def info(self) -> dict:
        resp = _transport_request("GET", f"{self.base_url}/info", self.config,
                                  inflight=self._inflight)
        if resp.status_code != 200:
            raise ProviderError(f"sidecar /info returned {resp.status_code}")
        return resp.json()

    @property
    def dim(self) -> int:
        """Embedding dimension, fetched from /info on first use."""
        if self._dim is None:
            self._dim = int(self.info()["embedding_dim"])
        return self._dim


class HttpLlmProvider(LlmProvider):
    """Chat-completions client: system + user message in, first choice out.

    Base URL is configurable so any compatible gateway works. The API key is
    resolved from the environment variable named in the config, never from
    files, and is required before any network call happens.
    """

    def __init__(self, config: ProviderConfig):
        if config.kind != "http":
            raise InvalidInput("HttpLlmProvider requires an http config")
        self.config = config
        self.base_url = config.base_url.rstrip("/")
        self._inflight = threading.BoundedSemaphore(config.max_inflight)

    def _api_key(self) -> Optional[str]:
        if not self.config.api_key_env:
            return None
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise AuthError(
                f"environment variable {self.config.api_key_env!r} is not set"
            )
        return key

    def llm_complete(self, system_prefix: str, body: str) -> str:
        key = self._api_key()
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        payload = {
            "model": self.config.model_name or "gpt-4",
            "messages": [
                {"role": "system", "content": system_prefix},
                {"role": "user", "content": body},
            ],
        }
        logger.info("llm request model=%s body_words=%d",
                    payload["model"], len(body.split()))
        resp = _transport_request(
            "POST", f"{self.base_url}/chat/completions", self.config,
            inflight=self._inflight, json=payload, headers=headers,
        )
        if resp.status_code in (401, 403):
            raise AuthError(f"LLM endpoint rejected credentials: {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(
                f"LLM endpoint returned {resp.status_code}: {_error_detail(resp)}"
            )
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed LLM response: {exc}") from exc
        logger.info("llm response words=%d", len(str(content).split()))
        return str(content)

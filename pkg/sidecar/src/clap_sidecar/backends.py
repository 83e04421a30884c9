"""Model backends behind the HTTP surface.

Two implementations share one small interface:

  DspBackend    - dependency-free spectral featurizer with a deterministic
                  template decoder. Ships with the repo so the service
                  contract is testable offline; useful for demos and CI.
  MsClapBackend - adapter around the pretrained contrastive language-audio
                  model (the `msclap` package). Weights are a deploy-time
                  artifact; the import happens lazily so the package
                  installs without torch.

Alternative encoders (PANNs, LAION CLAP) slot in the same way as
embedding-only backends with supports_decode=False.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

from .audio import decode_wav, resample

DEFAULT_CHECKPOINT = "msclap-2023"


class DecodeNotSupported(RuntimeError):
    """Backend has no caption decoder."""


class Backend:
    model_name: str
    embedding_dim: int
    supports_decode: bool = False

    def embed_audio(self, wav_bytes: bytes) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def decode(self, embedding: np.ndarray, prefix: str) -> str:
        raise DecodeNotSupported(f"{self.model_name} has no text decoder")


def _hash_unit_vector(key: str, dim: int) -> np.ndarray:
    raw = bytearray()
    counter = 0
    while len(raw) < dim * 4:
        raw += hashlib.sha256(f"{key}#{counter}".encode("utf-8")).digest()
        counter += 1
    ints = struct.unpack(f"<{dim}I", bytes(raw[: dim * 4]))
    vec = np.asarray([(v / 2**32) * 2.0 - 1.0 for v in ints], dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0], norm = 1.0, 1.0
    return (vec / norm).astype(np.float32)


_TEXTURES = ("smooth", "steady", "rattling", "grinding", "hissing", "knocking",
             "squealing", "humming")
_SOURCES = ("motor", "pump", "fan", "belt", "valve", "bearing", "compressor",
            "machine")


class DspBackend(Backend):
    """Deterministic spectral-band embeddings with a template decoder.

    Audio embeddings are log band energies of the magnitude spectrum over
    `dim` linear bands at 16 kHz, L2-normalized; identical input bytes give
    bitwise-identical vectors. Text embeddings are hash-derived unit
    vectors. The decoder maps dominant-band statistics onto a fixed
    vocabulary, always honoring the caption prefix.
    """

    sample_rate = 16000

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("DspBackend needs dim >= 2")
        self.model_name = f"dsp-bands-{dim}"
        self.embedding_dim = dim
        self.supports_decode = True

    def embed_audio(self, wav_bytes: bytes) -> np.ndarray:
        samples, rate = decode_wav(wav_bytes)
        samples = resample(samples, rate, self.sample_rate)
        spectrum = np.abs(np.fft.rfft(samples.astype(np.float64)))
        bands = np.array_split(spectrum, self.embedding_dim)
        energies = np.asarray([float(np.sqrt(np.mean(b**2))) if b.size else 0.0
                               for b in bands])
        vec = np.log1p(energies)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:  # silence: fixed deterministic direction
            vec = np.zeros(self.embedding_dim)
            vec[0] = 1.0
            norm = 1.0
        return (vec / norm).astype(np.float32)

    def embed_text(self, text: str) -> np.ndarray:
        return _hash_unit_vector(f"dsp-text:{text}", self.embedding_dim)

    def decode(self, embedding: np.ndarray, prefix: str) -> str:
        emb = np.asarray(embedding, dtype=np.float64)
        dominant = int(np.argmax(np.abs(emb)))
        spread = float(np.std(emb))
        texture = _TEXTURES[dominant % len(_TEXTURES)]
        source = _SOURCES[int(spread * 1e6) % len(_SOURCES)]
        caption = f"a {texture} {source} sound"
        return f"{prefix} {caption}" if prefix else caption


class MsClapBackend(Backend):
    """Pretrained contrastive language-audio model via the `msclap` package.

    The checkpoint identifier is configuration; weights download on first
    use (deploy-time concern). This adapter exposes the audio and text
    encoders; embedding-level caption decoding is not wired to the released
    checkpoint API, so /decode reports unsupported.
    """

    def __init__(self, checkpoint: str = DEFAULT_CHECKPOINT, device: str = "cpu"):
        try:
            from msclap import CLAP
        except ImportError as exc:
            raise RuntimeError(
                "the msclap package is not installed; install the sidecar "
                "with the [clap] extra to use this backend"
            ) from exc
        version = checkpoint.split("-")[-1]
        self._clap = CLAP(version=version, use_cuda=(device == "cuda"))
        self.model_name = checkpoint
        probe = self.embed_text("probe")
        self.embedding_dim = int(probe.shape[0])
        self.supports_decode = False

    def embed_audio(self, wav_bytes: bytes) -> np.ndarray:
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
            tmp.write(wav_bytes)
            tmp.flush()
            emb = self._clap.get_audio_embeddings([tmp.name])
        return np.asarray(emb[0], dtype=np.float32).reshape(-1)

    def embed_text(self, text: str) -> np.ndarray:
        emb = self._clap.get_text_embeddings([text])
        return np.asarray(emb[0], dtype=np.float32).reshape(-1)


def make_backend(kind: str, dim: int = 64, checkpoint: str = DEFAULT_CHECKPOINT,
                 device: str = "cpu") -> Backend:
    if kind == "dsp":
        return DspBackend(dim=dim)
    if kind == "msclap":
        return MsClapBackend(checkpoint=checkpoint, device=device)
    raise ValueError(f"unknown backend kind {kind!r}")

"""HTTP surface over a pretrained audio/text embedding backend.

JSON in, JSON out; every error is {"error": "..."} with a meaningful
status: 422 for undecodable/ill-shaped inputs, 404 for missing paths,
501 when the active backend has no decoder.
"""
from __future__ import annotations

import base64
import binascii
import os
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .audio import AudioDecodeError
from .backends import Backend, DecodeNotSupported, make_backend


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(backend: Backend) -> FastAPI:
    app = FastAPI(title="clap-sidecar", version="0.1.0")
    app.state.backend = backend

    @app.get("/info")
    def info():
        return {
            "model_name": backend.model_name,
            "embedding_dim": backend.embedding_dim,
            "supports_decode": backend.supports_decode,
        }

    @app.post("/embed/audio")
    async def embed_audio(request: Request):
        payload = await _json_body(request)
        if isinstance(payload, JSONResponse):
            return payload
        if "audio_b64" in payload:
            try:
                wav_bytes = base64.b64decode(payload["audio_b64"], validate=True)
            except (binascii.Error, TypeError):
                return _error(422, "audio_b64 is not valid base64")
        elif "path" in payload:
            path = Path(str(payload["path"]))
            if not path.is_file():
                return _error(404, f"no such audio file: {path}")
            wav_bytes = path.read_bytes()
        else:
            return _error(422, "request needs audio_b64 or path")
        try:
            vec = backend.embed_audio(wav_bytes)
        except AudioDecodeError as exc:
            return _error(422, str(exc))
        return {"embedding": [float(v) for v in vec]}

    @app.post("/embed/text")
    async def embed_text(request: Request):
        payload = await _json_body(request)
        if isinstance(payload, JSONResponse):
            return payload
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            return _error(422, "text must be a non-empty string")
        vec = backend.embed_text(text)
        return {"embedding": [float(v) for v in vec]}

    @app.post("/decode")
    async def decode(request: Request):
        payload = await _json_body(request)
        if isinstance(payload, JSONResponse):
            return payload
        embedding = payload.get("embedding")
        if not isinstance(embedding, list):
            return _error(422, "embedding must be a list of floats")
        if len(embedding) != backend.embedding_dim:
            return _error(
                422,
                f"embedding length {len(embedding)} != "
                f"expected {backend.embedding_dim}",
            )
        try:
            vec = np.asarray(embedding, dtype=np.float32)
        except (TypeError, ValueError):
            return _error(422, "embedding must contain only numbers")
        if not np.all(np.isfinite(vec)):
            return _error(422, "embedding contains NaN or Inf")
        prefix = str(payload.get("prefix", ""))
        try:
            caption = backend.decode(vec, prefix)
        except DecodeNotSupported as exc:
            return _error(501, str(exc))
        return {"caption": caption}

    return app


async def _json_body(request: Request):
    try:
        payload = await request.json()
    except Exception:
        return _error(422, "request body must be JSON")
    if not isinstance(payload, dict):
        return _error(422, "request body must be a JSON object")
    return payload


def app_from_env() -> FastAPI:
    """Build the app from environment configuration.

    CLAP_SIDECAR_BACKEND  dsp (default) or msclap
    CLAP_SIDECAR_DIM      embedding dim for the dsp backend (default 64)
    CLAP_SIDECAR_MODEL    checkpoint id for msclap (default msclap-2023)
    CLAP_SIDECAR_DEVICE   cpu (default) or cuda
    """
    backend = make_backend(
        kind=os.environ.get("CLAP_SIDECAR_BACKEND", "dsp"),
        dim=int(os.environ.get("CLAP_SIDECAR_DIM", "64")),
        checkpoint=os.environ.get("CLAP_SIDECAR_MODEL", "msclap-2023"),
        device=os.environ.get("CLAP_SIDECAR_DEVICE", "cpu"),
    )
    return create_app(backend)

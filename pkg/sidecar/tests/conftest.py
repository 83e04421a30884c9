import wave
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from clap_sidecar.app import create_app
from clap_sidecar.backends import DspBackend

RATE = 16000


def write_wav(path: Path, samples: np.ndarray, rate: int = RATE) -> Path:
    pcm = (np.clip(samples, -1.0, 1.0) * 32000).astype("<i2")
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())
    return path


@pytest.fixture(scope="session")
def fixture_wavs(tmp_path_factory) -> list[Path]:
    """10 clips: eight tones of varying pitch/noise, one chirp, one silence."""
    root = tmp_path_factory.mktemp("wavs")
    rng = np.random.default_rng(123)
    t = np.arange(RATE) / RATE
    paths = []
    for i in range(8):
        freq = 120.0 * (i + 1)
        tone = np.sin(2 * np.pi * freq * t) + 0.05 * i * rng.standard_normal(t.shape)
        paths.append(write_wav(root / f"tone_{i}.wav", tone * 0.6))
    chirp = np.sin(2 * np.pi * (200 + 1800 * t) * t)
    paths.append(write_wav(root / "chirp.wav", chirp * 0.6))
    paths.append(write_wav(root / "silence.wav", np.zeros(RATE)))
    return paths


@pytest.fixture(scope="session")
def backend() -> DspBackend:
    return DspBackend(dim=64)


@pytest.fixture(scope="session")
def client(backend) -> TestClient:
    return TestClient(create_app(backend))

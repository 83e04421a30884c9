"""WAV decoding and resampling.

Resampling happens inside the sidecar so callers can ship audio at any
rate; backends always see mono float32 at their preferred rate.
"""
from __future__ import annotations

import io
import wave

import numpy as np


class AudioDecodeError(ValueError):
    """Bytes do not decode as supported audio."""


def decode_wav(data: bytes) -> tuple[np.ndarray, int]:
    """16/8/32-bit PCM WAV bytes -> (mono float32 in [-1, 1], sample_rate)."""
    try:
        with wave.open(io.BytesIO(data), "rb") as fh:
            rate = fh.getframerate()
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            frames = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioDecodeError(f"not a decodable WAV stream: {exc}") from exc
    if rate <= 0 or channels <= 0:
        raise AudioDecodeError("WAV header declares no channels or zero rate")
    if width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 4:
        samples = np.frombuffer(frames, dtype="<i4").astype(np.float32) / 2147483648.0
    elif width == 1:
        samples = (np.frombuffer(frames, dtype=np.uint8).astype(np.float32) - 128.0) / 128.0
    else:
        raise AudioDecodeError(f"unsupported sample width {width}")
    if samples.size == 0:
        raise AudioDecodeError("WAV stream contains no samples")
    if channels > 1:
        samples = samples[: (samples.size // channels) * channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate


def resample(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resample; identity when rates already match."""
    if rate == target_rate:
        return samples.astype(np.float32)
    duration = samples.size / rate
    n_out = max(1, int(round(duration * target_rate)))
    x_out = np.linspace(0.0, samples.size - 1, n_out)
    x_in = np.arange(samples.size)
    return np.interp(x_out, x_in, samples).astype(np.float32)

#!/usr/bin/env python3
"""Generate a synthetic DCASE-2020-style audio tree for offline demos.

Normal clips are clean machine-like tones per machine ID; anomalous test
clips add harmonic rattle and noise bursts, so any content-sensitive audio
encoder (e.g. the sidecar's DSP backend) separates the clusters.

Usage:
    python scripts/make_demo_dataset.py --out demo_audio
"""
import argparse
import wave
from pathlib import Path

import numpy as np

RATE = 16000

MACHINES = {
    "pump": {"id_00": 220.0, "id_02": 260.0},
    "fan": {"id_00": 150.0, "id_02": 180.0},
}


def synth(rng, base_freq, seconds=1.0, anomalous=False):
    t = np.arange(int(RATE * seconds)) / RATE
    signal = np.sin(2 * np.pi * base_freq * t)
    signal += 0.3 * np.sin(2 * np.pi * 2 * base_freq * t)
    signal += 0.02 * rng.standard_normal(t.shape)
    if anomalous:
        # rattle harmonics plus a noise burst halfway through the clip
        signal += 0.6 * np.sin(2 * np.pi * 7.3 * base_freq * t)
        burst = slice(len(t) // 2, len(t) // 2 + RATE // 10)
        signal[burst] += 1.5 * rng.standard_normal(burst.stop - burst.start)
    signal /= np.max(np.abs(signal))
    return (signal * 20000).astype("<i2")


def write_clip(path: Path, pcm) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(RATE)
        fh.writeframes(pcm.tobytes())


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--train-per-id", type=int, default=12)
    parser.add_argument("--test-per-id", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    root = Path(args.out)
    total = 0
    for machine, ids in MACHINES.items():
        for machine_id, freq in ids.items():
            tag = machine_id.replace("id_", "")
            for i in range(args.train_per_id):
                clip = synth(rng, freq * (1 + 0.01 * (i % 3)))
                write_clip(root / machine / "train"
                           / f"normal_id_{tag}_{i:08d}.wav", clip)
                total += 1
            for i in range(args.test_per_id):
                write_clip(root / machine / "test"
                           / f"normal_id_{tag}_{i + 100:08d}.wav",
                           synth(rng, freq))
                write_clip(root / machine / "test"
                           / f"anomaly_id_{tag}_{i + 200:08d}.wav",
                           synth(rng, freq, anomalous=True))
                total += 2
    print(f"wrote {total} clips under {root}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Full AUC-table experiment over a DCASE 2020 task 2 style dataset.

Embeds every clip through a running inference sidecar, then evaluates
per-machine-ID AUC with k-NN anomaly scores. The dataset is not bundled;
point --dataset-root at a directory laid out as

    <root>/<machine_type>/train/normal_id_XX_*.wav
    <root>/<machine_type>/test/{normal,anomaly}_id_XX_*.wav

Example:
    python -m clap_sidecar &                       # from the sidecar package
    python scripts/run_dcase_experiment.py \
        --dataset-root /data/dcase2020_task2_dev \
        --sidecar-url http://127.0.0.1:8641 \
        --out-dir results/
"""
import argparse
import sys
from pathlib import Path

from sounddiff.cli import main as sounddiff_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset-root", required=True)
    parser.add_argument("--sidecar-url", required=True)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--normalize-embeddings", action="store_true")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "embeddings.json"

    rc = sounddiff_main([
        "index", args.dataset_root,
        "--out", str(manifest),
        "--provider", "http",
        "--base-url", args.sidecar_url,
    ])
    if rc != 0:
        print(f"indexing finished with code {rc} (see warnings above)",
              file=sys.stderr)
        if not manifest.exists():
            return rc

    eval_args = [
        "evaluate",
        "--train", str(manifest),
        "--test", str(manifest),
        "--k", str(args.k),
        "--provider", "http",
        "--base-url", args.sidecar_url,
        "--out", str(out_dir / "auc_report.csv"),
    ]
    if args.normalize_embeddings:
        eval_args.append("--normalize-embeddings")
    return sounddiff_main(eval_args)


if __name__ == "__main__":
    sys.exit(main())

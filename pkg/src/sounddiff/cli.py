"""Command-line surface: index, score, evaluate, caption.

Exit codes: 0 ok, 1 usage, 2 data/precondition problem, 3 provider failure.
Every artifact-producing command echoes the effective scoring/provider
configuration into its output (volatile output paths excluded, so repeated
runs with the same inputs are byte-identical).
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import captioning
from .anomaly import ScoringConfig, anomaly_score, calibrate_threshold, classify
from .errors import (
    AuthError,
    InsufficientReferences,
    InvalidInput,
    NotFound,
    ProviderError,
    SounddiffError,
)
from .evaluation import evaluate_machine, format_report_csv
from .providers import (
    DEFAULT_MOCK_DIM,
    FileEmbeddingProvider,
    HttpEmbeddingProvider,
    HttpLlmProvider,
    MockDecoderProvider,
    MockEmbeddingProvider,
    MockLlmProvider,
    ProviderConfig,
)
from .store import SampleRecord, load_store, save_store
from .util import atomic_write_text, dump_json
from .zero_shot import (
    DEFAULT_REFERENCE_TEXTS,
    ReferenceTextSet,
    load_reference_texts,
    similarity_matrix,
)

# DCASE-2020 task 2 file naming: <label>_id_<nn>_<clip>.wav
DCASE_NAME_RE = re.compile(r"^(?P<label>normal|anomaly)_(?P<machine_id>id_\d+)_.+$")

CLI_METHODS = {
    "decoder": captioning.METHOD_TEXT_DECODER,
    "zeroshot": captioning.METHOD_ZERO_SHOT,
    "hybrid": captioning.METHOD_HYBRID,
}


def parse_dcase_name(filename: str) -> tuple[str, str]:
    """(machine_id, label) from a DCASE-2020 file name, e.g. normal_id_02_....wav."""
    stem = Path(filename).stem
    m = DCASE_NAME_RE.match(stem)
    if not m:
        raise InvalidInput(f"file name {filename!r} does not follow DCASE naming")
    label = "anomalous" if m.group("label") == "anomaly" else "normal"
    return m.group("machine_id"), label


def _add_provider_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--provider", choices=["file", "http", "mock"], default=None,
                   help="embedding/decoder provider kind (default mock)")
    p.add_argument("--base-url", default=None, help="inference sidecar base URL")
    p.add_argument("--llm-base-url", default=None,
                   help="chat-completions base URL; if unset a mock LLM is used")
    p.add_argument("--api-key-env", default=None,
                   help="env var holding the LLM API key")
    p.add_argument("--model", default=None, help="LLM model name")
    p.add_argument("--file-manifest", default=None,
                   help="manifest backing the file provider (default: --train)")
    p.add_argument("--mock-dim", type=int, default=None,
                   help=f"mock embedding dimension (default {DEFAULT_MOCK_DIM})")


def _add_scoring_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None, help="neighbor count (default 4)")
    p.add_argument("--threshold-percentile", type=float, default=None,
                   help="leave-one-out percentile for the threshold (default 0.9)")
    p.add_argument("--normalize-embeddings", action="store_true", default=None,
                   help="L2-normalize embeddings before the Euclidean search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sounddiff",
        description="k-NN anomaly detection and difference captioning "
                    "over pretrained audio embeddings",
    )
    parser.add_argument("--config", default=None,
                        help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="embed a DCASE-layout audio tree into a store")
    p_index.add_argument("input_dir", help="directory laid out as <machine_type>/<split>/*.wav")
    p_index.add_argument("--out", required=True, help="manifest path to write")
    _add_provider_flags(p_index)

    p_score = sub.add_parser("score", help="anomaly-score one audio input")
    p_score.add_argument("--train", required=True, help="training store manifest")
    p_score.add_argument("--input", required=True, help="audio file to score")
    p_score.add_argument("--out", default=None, help="write the result JSON here")
    _add_scoring_flags(p_score)
    _add_provider_flags(p_score)

    p_eval = sub.add_parser("evaluate", help="per-machine-ID AUC report")
    p_eval.add_argument("--train", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--out", required=True, help="report CSV path")
    _add_scoring_flags(p_eval)
    _add_provider_flags(p_eval)

    p_cap = sub.add_parser("caption", help="difference caption for one audio input")
    p_cap.add_argument("--train", required=True)
    p_cap.add_argument("--input", required=True)
    p_cap.add_argument("--method", choices=sorted(CLI_METHODS), required=True)
    p_cap.add_argument("--texts", default=None,
                       help="reference-text file, one per line (default: built-in 8)")
    p_cap.add_argument("--machine", default=None,
                       help="machine name for the prompt (default: nearest neighbor's type)")
    p_cap.add_argument("--out", default=None, help="write the caption record here")
    _add_scoring_flags(p_cap)
    _add_provider_flags(p_cap)
    return parser


_CONFIG_KEYS = (
    "provider", "base_url", "llm_base_url", "api_key_env", "model",
    "file_manifest", "mock_dim", "k", "threshold_percentile",
    "normalize_embeddings", "texts", "machine",
)


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Overlay: flag value if given, else config-file value, else default."""
    defaults = {
        "provider": "mock", "base_url": None, "llm_base_url": None,
        "api_key_env": None, "model": None, "file_manifest": None,
        "mock_dim": DEFAULT_MOCK_DIM, "k": 4, "threshold_percentile": 0.9,
        "normalize_embeddings": False, "texts": None, "machine": None,
    }
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config file {args.config}: {exc}")
        unknown = set(file_cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
    for key in _CONFIG_KEYS:
        if not hasattr(args, key):
            continue
        if getattr(args, key) is None and key in file_cfg:
            setattr(args, key, file_cfg[key])
        if getattr(args, key) is None and key in defaults:
            setattr(args, key, defaults[key])
    return args


def _scoring_config(args) -> ScoringConfig:
    return ScoringConfig(
        k=int(args.k),
        threshold_percentile=float(args.threshold_percentile),
        normalize=bool(args.normalize_embeddings),
    )


def _make_embedder(args):
    if args.provider == "mock":
        return MockEmbeddingProvider(dim=int(args.mock_dim))
    if args.provider == "file":
        manifest = args.file_manifest or getattr(args, "train", None)
        if not manifest:
            raise InvalidInput("file provider needs --file-manifest or --train")
        return FileEmbeddingProvider(manifest)
    return HttpEmbeddingProvider(_http_config(args))


def _http_config(args) -> ProviderConfig:
    if not args.base_url:
        raise InvalidInput("http provider requires --base-url")
    return ProviderConfig(kind="http", base_url=args.base_url,
                          model_name=args.model)


def _make_decoder(args, embedder):
    if args.provider == "http":
        return embedder if isinstance(embedder, HttpEmbeddingProvider) \
            else HttpEmbeddingProvider(_http_config(args))
    return MockDecoderProvider()


def _make_llm(args):
    if args.llm_base_url:
        return HttpLlmProvider(ProviderConfig(
            kind="http", base_url=args.llm_base_url,
            api_key_env=args.api_key_env, model_name=args.model,
        ))
    return MockLlmProvider()


def _provider_echo(args, include_llm: bool = False) -> dict:
    echo = {"provider": args.provider}
    if args.provider == "http":
        echo["base_url"] = args.base_url
    if args.provider == "mock":
        echo["mock_dim"] = int(args.mock_dim)
    if include_llm:
        if getattr(args, "llm_base_url", None):
            echo["llm_base_url"] = args.llm_base_url
            if args.model:
                echo["llm_model"] = args.model
        else:
            echo["llm"] = "mock"
    return echo


def _provider_note(args) -> str:
    """Compact provider identity for report comment lines.

    Evaluation reads embeddings from manifests, so the caller must pass the
    same provider flags used at index time for the echo to be truthful.
    """
    if args.provider == "http":
        return f"http({args.base_url})"
    if args.provider == "file":
        return f"file({args.file_manifest or getattr(args, 'train', '?')})"
    return f"mock(dim={int(args.mock_dim)})"


def _emit(payload: dict, out: Optional[str]) -> None:
    text = dump_json(payload)
    sys.stdout.write(text)
    if out:
        atomic_write_text(out, text)


def cmd_index(args) -> int:
    input_dir = Path(args.input_dir)
    if not input_dir.is_dir():
        raise InvalidInput(f"input directory {input_dir} does not exist")
    embedder = _make_embedder(args)
    todo: list[tuple[Path, str, str, str, str]] = []
    skips: list[dict] = []
    for machine_dir in sorted(p for p in input_dir.iterdir() if p.is_dir()):
        for split_dir in sorted(p for p in machine_dir.iterdir() if p.is_dir()):
            if split_dir.name not in ("train", "test"):
                skips.append({"path": str(split_dir),
                              "reason": "not a train/test split directory"})
                continue
            for wav in sorted(split_dir.glob("*.wav")):
                try:
                    machine_id, label = parse_dcase_name(wav.name)
                except InvalidInput as exc:
                    skips.append({"path": str(wav), "reason": str(exc)})
                    continue
                todo.append((wav, machine_dir.name, split_dir.name, machine_id, label))

    def embed_one(item):
        try:
            return embedder.embed_audio(str(item[0])), None
        except (ProviderError, NotFound) as exc:
            return None, exc

    records: list[SampleRecord] = []
    provider_failed = False
    with ThreadPoolExecutor(max_workers=4) as pool:
        for (wav, machine_type, split, machine_id, label), (emb, exc) in zip(
                todo, pool.map(embed_one, todo)):
            if exc is not None:
                skips.append({"path": str(wav), "reason": f"provider: {exc}"})
                provider_failed = True
                continue
            records.append(SampleRecord(
                sample_id=f"{machine_type}/{split}/{wav.stem}",
                machine_type=machine_type,
                machine_id=machine_id,
                label=label,
                split=split,
                source_path=str(wav),
                embedding=emb,
            ))
    dim = getattr(embedder, "dim", None)
    if dim is None and not records:
        raise InvalidInput("cannot determine embedding dimension for an empty store")
    manifest = save_store(records, args.out, dim=dim)
    if not records and not skips:
        print(f"warning: no audio files found under {input_dir}", file=sys.stderr)
    for skip in skips:
        print(f"warning: skipped {skip['path']}: {skip['reason']}", file=sys.stderr)
    _emit({"manifest": str(args.out), "count": manifest.count, "skipped": skips}, None)
    if skips:
        return 3 if provider_failed else 2
    return 0


def cmd_score(args) -> int:
    config = _scoring_config(args)
    store = load_store(args.train).filter(split="train", label="normal")
    embedder = _make_embedder(args)
    query = embedder.embed_audio(str(args.input))
    result = anomaly_score(query, store, config, sample_id=str(args.input))
    if len(store) >= config.k + 1:
        result = classify(result, calibrate_threshold(store, config))
    payload = {
        "sample_id": result.sample_id,
        "score": result.score,
        "neighbor_ids": list(result.neighbor_ids),
        "threshold": result.threshold,
        "decision": result.decision,
        "config": {**config.echo(), **_provider_echo(args)},
    }
    _emit(payload, args.out)
    return 0


def cmd_evaluate(args) -> int:
    config = _scoring_config(args)
    train = load_store(args.train)
    test = load_store(args.test)
    report = evaluate_machine(train, test, config,
                              provider_note=_provider_note(args))
    text = format_report_csv(report)
    sys.stdout.write(text)
    atomic_write_text(args.out, text)
    if not report.results:
        print("error: no machine ID could be evaluated", file=sys.stderr)
        for skip in report.skips:
            print(f"  {skip.machine_type}/{skip.machine_id}: {skip.reason}",
                  file=sys.stderr)
        return 2
    return 0


def _reference_texts(args) -> tuple[str, ...]:
    if args.texts:
        return load_reference_texts(args.texts)
    return DEFAULT_REFERENCE_TEXTS


def cmd_caption(args) -> int:
    config = _scoring_config(args)
    method = CLI_METHODS[args.method]
    store = load_store(args.train).filter(split="train", label="normal")
    embedder = _make_embedder(args)
    decoder = _make_decoder(args, embedder)
    llm = _make_llm(args)
    sample_id = str(args.input)
    partial: dict = {
        "sample_id": sample_id,
        "method": method,
        "config": {**config.echo(), **_provider_echo(args, include_llm=True),
                   "texts": args.texts or f"builtin:{len(DEFAULT_REFERENCE_TEXTS)}"},
    }
    try:
        query = embedder.embed_audio(sample_id)
        result = anomaly_score(query, store, config, sample_id=sample_id)
        neighbor_ids = list(result.neighbor_ids)
        machine = args.machine or store.get(neighbor_ids[0]).machine_type
        partial.update({
            "machine_name": machine,
            "anomaly_score": result.score,
            "neighbor_ids": neighbor_ids,
        })

        if method == captioning.METHOD_TEXT_DECODER:
            anomaly_caption = decoder.decode_caption(query, captioning.CAPTION_PREFIX)
            normal_caps = captioning.fetch_sample_captions(neighbor_ids, store, decoder)
            bundle = captioning.build_text_decoder_prompt(
                machine, anomaly_caption, [c.caption for c in normal_caps],
                anomaly_sample_id=sample_id, neighbor_ids=neighbor_ids,
            )
        else:
            texts = ReferenceTextSet.from_provider(_reference_texts(args), embedder)
            sounds = [(sample_id, query)] + [
                (nid, store.embedding(nid)) for nid in neighbor_ids
            ]
            sims = similarity_matrix(sounds, texts)
            anomaly_row = sims.row(sample_id)
            normal_rows = [sims.row(nid) for nid in neighbor_ids]
            if method == captioning.METHOD_ZERO_SHOT:
                bundle = captioning.build_zero_shot_prompt(
                    machine, anomaly_row, normal_rows, texts,
                    anomaly_sample_id=sample_id, neighbor_ids=neighbor_ids,
                )
            else:
                anomaly_caption = decoder.decode_caption(query, captioning.CAPTION_PREFIX)
                normal_caps = captioning.fetch_sample_captions(neighbor_ids, store, decoder)
                bundle = captioning.build_hybrid_prompt(
                    machine, (anomaly_caption, anomaly_row),
                    [(c.caption, row) for c, row in zip(normal_caps, normal_rows)],
                    texts, anomaly_sample_id=sample_id, neighbor_ids=neighbor_ids,
                )
        partial["system_prefix"] = bundle.system_prefix
        partial["prompt_body"] = bundle.body
        diff = captioning.generate_difference_caption(bundle, llm)
        partial["llm_response"] = diff.text
        partial["validation_flags"] = list(diff.validation_flags)
    except (ProviderError, NotFound) as exc:
        partial["error"] = str(exc)
        _emit(partial, args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    _emit(partial, args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors; we use 1
        return 0 if exc.code == 0 else 1
    try:
        args = _merge_config(args)
        handler = {
            "index": cmd_index,
            "score": cmd_score,
            "evaluate": cmd_evaluate,
            "caption": cmd_caption,
        }[args.command]
        return handler(args)
    except AuthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InsufficientReferences, InvalidInput, NotFound, SounddiffError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

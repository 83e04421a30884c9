"""Difference-caption prompt assembly and provider orchestration.

Three prompt flavors explain how an anomaly-flagged sound differs from its
k nearest normal references: per-sample decoder captions, zero-shot
similarity scores against predefined texts, or both combined in one CSV.
Builders are pure string functions; the same inputs always produce
byte-identical prompts.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InvalidInput, ProviderError
from .store import EmbeddingStore
from .zero_shot import ReferenceTextSet

METHOD_TEXT_DECODER = "text_decoder"
METHOD_ZERO_SHOT = "zero_shot"
METHOD_HYBRID = "hybrid"
METHODS = (METHOD_TEXT_DECODER, METHOD_ZERO_SHOT, METHOD_HYBRID)

# Shared instruction prepended to every difference-caption request. The output
# constraints (sentence opener + word budget) are frozen here so prompts stay
# reproducible; golden tests pin the exact wording.
SYSTEM_PREFIX = (
    'You are comparing machine sounds. Begin your output sentence with '
    '"This sound is" and finish it within 40 words.'
)

# Decoder-side caption conditioning prefix for per-sample captions.
CAPTION_PREFIX = "Sounds like"

RESPONSE_PREFIX = "This sound is"
RESPONSE_WORD_LIMIT = 40

FLAG_MISSING_PREFIX = "missing_prefix"
FLAG_WORD_LIMIT = "word_limit_exceeded"


@dataclass(frozen=True)
class PromptBundle:
    """Assembled prompt plus the metadata needed to audit it."""

    method: str
    system_prefix: str
    body: str
    machine_name: str
    anomaly_sample_id: str
    neighbor_ids: tuple[str, ...]

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInput(f"unknown method {self.method!r}")
        if not self.body:
            raise InvalidInput("prompt body must be non-empty")


@dataclass(frozen=True)
class CaptionRecord:
    sample_id: str
    caption: str


@dataclass(frozen=True)
class DifferenceCaption:
    """LLM response text, verbatim, with constraint-violation flags."""

    text: str
    validation_flags: tuple[str, ...]


def fetch_sample_captions(
    ids: Sequence[str],
    store: EmbeddingStore,
    decoder,
    prefix: str = CAPTION_PREFIX,
) -> list[CaptionRecord]:
    """Caption each stored embedding via the decoder provider, order preserved.

    Captions always come from the stored vectors, never from re-encoded
    audio, so they describe exactly what the anomaly score saw.
    """
    out = []
    for sample_id in ids:
        emb = store.embedding(sample_id)  # NotFound for unknown ids
        try:
            caption = decoder.decode_caption(emb, prefix)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"decoder failed for sample {sample_id!r}: {exc}") from exc
        out.append(CaptionRecord(sample_id=sample_id, caption=caption))
    return out


def build_text_decoder_prompt(
    machine_name: str,
    anomaly_caption: str,
    normal_captions: Sequence[str],
    anomaly_sample_id: str = "",
    neighbor_ids: Sequence[str] = (),
) -> PromptBundle:
    """Prompt comparing the anomaly's caption against the k normal captions."""
    if not machine_name or not anomaly_caption:
        raise InvalidInput("machine_name and anomaly_caption must be non-empty")
    normals = list(normal_captions)
    if not normals or any(not c for c in normals):
        raise InvalidInput("need at least one non-empty normal caption")
    neighbor_ids = tuple(neighbor_ids)
    if neighbor_ids and len(neighbor_ids) != len(normals):
        raise InvalidInput("neighbor_ids must match normal_captions one-to-one")
    body = (
        f"The caption of the anomalous sound of {machine_name} is given as: "
        f"{anomaly_caption}. "
        f"On the other hand, the captions of the normal sounds of {machine_name} "
        f"are given as: {', '.join(normals)}. "
        "Please describe in broad strokes how this anomalous sound differs "
        "compared to the normal sounds."
    )
    return PromptBundle(
        method=METHOD_TEXT_DECODER,
        system_prefix=SYSTEM_PREFIX,
        body=body,
        machine_name=machine_name,
        anomaly_sample_id=anomaly_sample_id,
        neighbor_ids=neighbor_ids,
    )


def _format_value(v: float) -> str:
    text = f"{float(v):.4f}"
    return "0.0000" if text == "-0.0000" else text


def _csv_field(text: str) -> str:
    if any(ch in text for ch in (',', '"', '\n', '\r')):
        return '"' + text.replace('"', '""') + '"'
    return text


def format_scores_csv(
    col_texts: Sequence[str],
    rows: Sequence[tuple[Optional[str], Sequence[float]]],
) -> str:
    """Similarity scores as CSV: header of reference texts, one line per sound.

    Values are fixed-point with exactly 4 decimals. When captions are present
    (hybrid layout) the header gains a leading "caption" column and every
    caption field is double-quoted, so embedded commas cannot shift columns.
    Lines are joined with a single newline and there is no trailing newline.
    """
    col_texts = list(col_texts)
    if not col_texts:
        raise InvalidInput("need at least one reference-text column")
    caption_flags = {row[0] is not None for row in rows}
    if len(caption_flags) > 1:
        raise InvalidInput("caption column must be present for all rows or none")
    with_captions = bool(rows) and rows[0][0] is not None

    header = ",".join(_csv_field(t) for t in col_texts)
    if with_captions:
        header = "caption," + header
    lines = [header]
    for caption, values in rows:
        values = list(values)
        if len(values) != len(col_texts):
            raise InvalidInput(
                f"row has {len(values)} values for {len(col_texts)} columns"
            )
        cells = [_format_value(v) for v in values]
        if with_captions:
            cells.insert(0, '"' + str(caption).replace('"', '""') + '"')
        lines.append(",".join(cells))
    return "\n".join(lines)


def _similarity_body(machine_name: str, anomaly_block: str, normal_block: str) -> str:
    return (
        f"The acoustic features of the anomalous sound of {machine_name} "
        f"are given as {anomaly_block}. "
        f"On the other hand, the acoustic features of the k normal sounds of "
        f"{machine_name} are given as {normal_block}"
    )


def build_zero_shot_prompt(
    machine_name: str,
    anomaly_row: Sequence[float],
    normal_rows: Sequence[Sequence[float]],
    texts: ReferenceTextSet,
    anomaly_sample_id: str = "",
    neighbor_ids: Sequence[str] = (),
) -> PromptBundle:
    """Prompt comparing similarity-score CSV blocks, no caption column."""
    if not machine_name:
        raise InvalidInput("machine_name must be non-empty")
    if len(anomaly_row) != len(texts):
        raise InvalidInput(
            f"anomaly row has {len(anomaly_row)} values for {len(texts)} texts"
        )
    normal_rows = [list(r) for r in normal_rows]
    if not normal_rows:
        raise InvalidInput("need at least one normal similarity row")
    anomaly_block = format_scores_csv(texts.texts, [(None, anomaly_row)])
    normal_block = format_scores_csv(texts.texts, [(None, r) for r in normal_rows])
    return PromptBundle(
        method=METHOD_ZERO_SHOT,
        system_prefix=SYSTEM_PREFIX,
        body=_similarity_body(machine_name, anomaly_block, normal_block),
        machine_name=machine_name,
        anomaly_sample_id=anomaly_sample_id,
        neighbor_ids=tuple(neighbor_ids),
    )


def build_hybrid_prompt(
    machine_name: str,
    anomaly: tuple[str, Sequence[float]],
    normals: Sequence[tuple[str, Sequence[float]]],
    texts: ReferenceTextSet,
    anomaly_sample_id: str = "",
    neighbor_ids: Sequence[str] = (),
) -> PromptBundle:
    """Same layout as the zero-shot prompt, with a leading caption column."""
    if not machine_name:
        raise InvalidInput("machine_name must be non-empty")
    anomaly_caption, anomaly_row = anomaly
    normals = list(normals)
    if not normals:
        raise InvalidInput("need at least one normal (caption, row) pair")
    for caption, _ in [anomaly] + normals:
        if not caption:
            raise InvalidInput("hybrid prompt requires a caption for every row")
    anomaly_block = format_scores_csv(texts.texts, [(anomaly_caption, anomaly_row)])
    normal_block = format_scores_csv(texts.texts, [(c, r) for c, r in normals])
    return PromptBundle(
        method=METHOD_HYBRID,
        system_prefix=SYSTEM_PREFIX,
        body=_similarity_body(machine_name, anomaly_block, normal_block),
        machine_name=machine_name,
        anomaly_sample_id=anomaly_sample_id,
        neighbor_ids=tuple(neighbor_ids),
    )


def validate_response(text: str) -> tuple[str, ...]:
    """Flags for responses violating the sentence-opener or word budget."""
    flags = []
    if not text.startswith(RESPONSE_PREFIX):
        flags.append(FLAG_MISSING_PREFIX)
    if len(text.split()) > RESPONSE_WORD_LIMIT:
        flags.append(FLAG_WORD_LIMIT)
    return tuple(flags)


def generate_difference_caption(bundle: PromptBundle, llm) -> DifferenceCaption:
    """Run the prompt through the LLM provider; response returned verbatim.

    Constraint violations are reported as flags, never raised: providers are
    nondeterministic and the pipeline's job is auditability, not enforcement.
    """
    try:
        text = llm.llm_complete(bundle.system_prefix, bundle.body)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"LLM completion failed: {exc}") from exc
    return DifferenceCaption(text=text, validation_flags=validate_response(text))

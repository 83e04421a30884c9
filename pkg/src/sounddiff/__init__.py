"""Training-free machine-sound anomaly detection and difference captioning.

Test sounds are scored by the mean Euclidean distance from their embedding
to the k nearest normal-sound embeddings in a reference store; flagged
sounds are then explained by retrieval-augmented prompts built from the
same embeddings and the same k neighbors.
"""

from .anomaly import (
    AnomalyResult,
    ScoringConfig,
    anomaly_score,
    calibrate_threshold,
    classify,
    leave_one_out_scores,
)
from .captioning import (
    CaptionRecord,
    DifferenceCaption,
    PromptBundle,
    build_hybrid_prompt,
    build_text_decoder_prompt,
    build_zero_shot_prompt,
    fetch_sample_captions,
    format_scores_csv,
    generate_difference_caption,
)
from .errors import (
    AuthError,
    CorruptStore,
    DegenerateVector,
    DimensionMismatch,
    DuplicateId,
    InsufficientReferences,
    InvalidInput,
    NotFound,
    ProviderError,
    SounddiffError,
    StorageError,
    UnsupportedFormat,
)
from .evaluation import EvaluationReport, RocResult, evaluate_machine, roc_auc
from .store import (
    EmbeddingStore,
    SampleRecord,
    StoreManifest,
    as_embedding,
    knn_search,
    load_store,
    save_store,
)
from .zero_shot import (
    DEFAULT_REFERENCE_TEXTS,
    ReferenceTextSet,
    SimilarityMatrix,
    cosine_similarity,
    load_reference_texts,
    similarity_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "AnomalyResult",
    "AuthError",
    "CaptionRecord",
    "CorruptStore",
    "DEFAULT_REFERENCE_TEXTS",
    "DegenerateVector",
    "DifferenceCaption",
    "DimensionMismatch",
    "DuplicateId",
    "EmbeddingStore",
    "EvaluationReport",
    "InsufficientReferences",
    "InvalidInput",
    "NotFound",
    "PromptBundle",
    "ProviderError",
    "ReferenceTextSet",
    "RocResult",
    "SampleRecord",
    "ScoringConfig",
    "SimilarityMatrix",
    "SounddiffError",
    "StorageError",
    "StoreManifest",
    "UnsupportedFormat",
    "anomaly_score",
    "as_embedding",
    "build_hybrid_prompt",
    "build_text_decoder_prompt",
    "build_zero_shot_prompt",
    "calibrate_threshold",
    "classify",
    "cosine_similarity",
    "evaluate_machine",
    "fetch_sample_captions",
    "format_scores_csv",
    "generate_difference_caption",
    "knn_search",
    "leave_one_out_scores",
    "load_reference_texts",
    "load_store",
    "roc_auc",
    "save_store",
    "similarity_matrix",
]

"""Exception hierarchy shared across the pipeline."""


class SounddiffError(Exception):
    """Base class for all pipeline errors."""


class DimensionMismatch(SounddiffError):
    """Embedding dimensions disagree (store vs. query, or within a batch)."""


class DuplicateId(SounddiffError):
    """Two records share one sample_id."""


class StorageError(SounddiffError):
    """Manifest or blob could not be written."""


class CorruptStore(SounddiffError):
    """Manifest and blob are mutually inconsistent."""


class UnsupportedFormat(SounddiffError):
    """Manifest declares a dtype tag this reader does not understand."""


class InsufficientReferences(SounddiffError):
    """Fewer reference records available than the requested k."""


class DegenerateVector(SounddiffError):
    """Zero-norm vector where a direction is required (cosine, normalization)."""


class InvalidInput(SounddiffError):
    """Caller-supplied data violates an operation precondition."""


class NotFound(SounddiffError):
    """Requested sample_id / precomputed entry does not exist."""


class ProviderError(SounddiffError):
    """An embedding, decoder, or LLM provider call failed."""


class AuthError(ProviderError):
    """Provider credentials are missing or rejected."""

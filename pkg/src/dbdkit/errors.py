"""Exception types shared across the toolkit."""


class DBDError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DBDError):
    """A value violates a structural invariant at construction time."""


class ZeroNormError(DBDError):
    """A vector has zero L2 norm where a direction is required."""


class ManifestError(DBDError):
    """An operation was given a partition manifest that fails validation."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__(
            "manifest validation failed: "
            + "; ".join(str(v) for v in self.violations)
        )


class EmbeddingFileError(DBDError):
    """Malformed embedding file: bad magic, truncation, or dim mismatch."""


class ModelError(DBDError):
    """Base class for model-side failures."""


class ModelUnavailableError(ModelError):
    """The model backend (e.g. a bridge subprocess) is gone."""


class ContextMismatchError(ModelError):
    """A request was issued against a prompt context the model does not own."""


class OutOfVocabError(ModelError):
    """A token id falls outside the model vocabulary."""


class BridgeProtocolError(ModelError):
    """The bridge endpoint sent a response violating the wire protocol."""

"""Exception hierarchy. The CLI maps PipelineError subclasses to exit code 2
(data error); anything else is an internal error (exit code 3)."""


class PipelineError(Exception):
    """Base class for all errors raised on bad inputs or contract violations."""


class DataFormatError(PipelineError):
    """An input file does not match its documented schema."""


class OntologyLoadError(DataFormatError):
    """A mapping/metadata file failed to parse; carries file and line context."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class EmptyDictionaryError(DataFormatError):
    """The synonym dictionary is empty after filtering; matching cannot proceed."""


class EmptyCandidateSetError(PipelineError):
    """A corpus produced no mention candidates; weak labelling cannot proceed."""


class SpanMappingError(PipelineError):
    """A character span covers no token: tokenizer/offset mismatch."""


class ProviderError(PipelineError):
    """Base class for embedding-provider failures."""


class TransportError(ProviderError):
    """The embedding service could not be reached or returned a bad status."""


class DimensionMismatchError(ProviderError):
    """Vector length differs from the configured embedding dimension."""


class OffsetValidationError(ProviderError):
    """Remote token offsets do not line up with the text that was sent."""


class TrainingError(PipelineError):
    """Base class for classifier-training failures."""


class SingleClassError(TrainingError):
    """Training labels contain only one class."""


class DivergenceError(TrainingError):
    """Training loss became non-finite."""


class ModelFormatError(DataFormatError):
    """A model file is corrupt or not a model file at all."""


class ModelVersionError(ModelFormatError):
    """A model file has an unsupported format version."""

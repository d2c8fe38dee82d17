"""Exception types shared across the workbench."""


class ImageFormatError(Exception):
    """File is not a decodable PNG/JPEG, or uses an unsupported layout."""


class DegenerateInputError(ValueError):
    """The requested quantity is undefined for this input (e.g. constant reference)."""


class DegenerateEmbeddingError(ValueError):
    """An embedding came out all-zero, so cosine similarity is undefined."""


class ModelLoadError(Exception):
    """Interchange model file missing, truncated, or not parseable."""


class ModelSpecError(Exception):
    """Sidecar spec disagrees with the model graph."""


class BackendError(Exception):
    """Inference through the embedding backend failed."""


class ConflictError(Exception):
    """Write rejected because it would duplicate an existing record."""


class NotFoundError(Exception):
    """Referenced pair, annotator, or session does not exist."""


class StateError(Exception):
    """Operation requires a store state that does not hold (e.g. non-final scores)."""


class ParseError(Exception):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

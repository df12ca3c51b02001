"""
Exception hierarchy shared by the retrieval, selection, agent and evaluation code.

Management commands map MagnetError subclasses to exit code 1 and
parameter precondition failures to exit code 2.
"""
from typing import Optional


class MagnetError(Exception):
    """Base class for every error raised by the toolkit."""


class InvariantError(MagnetError, ValueError):
    """A domain object was constructed with values that break its invariants."""


class DimensionError(InvariantError):
    """Vectors that must share a dimension do not."""


class DataIOError(MagnetError):
    """A file could not be opened, read or written."""


class FormatSyntaxError(MagnetError):
    """A file is not valid JSON / JSON Lines."""

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


class SchemaVersionError(MagnetError):
    """A file declares a schema_version this toolkit does not read."""

    def __init__(self, path: str, found, record_id: Optional[str] = None):
        self.path = path
        self.found = found
        self.record_id = record_id
        record = f" (record {record_id})" if record_id is not None else ""
        super().__init__(f"{path}{record}: unsupported schema_version {found!r}, expected '1'")


class RecordValidationError(MagnetError):
    """A loaded record violates a domain invariant."""

    def __init__(self, path: str, record_id: Optional[str], field: str, message: str):
        self.path = path
        self.record_id = record_id
        self.field = field
        record = record_id if record_id is not None else '<unknown>'
        super().__init__(f"{path}: record {record}, field {field}: {message}")


class ReferenceFormatError(MagnetError, ValueError):
    """A reference string entry does not match '<id>.txt NNNNs > MMMMs'."""

    def __init__(self, token: str, position: int, message: str):
        self.token = token
        self.position = position
        super().__init__(f"entry {position} {token!r}: {message}")


class EmbeddingError(MagnetError):
    """A text embedder failed for a specific input text."""

    def __init__(self, text: str, message: str):
        self.text = text
        super().__init__(f"cannot embed {text!r}: {message}")


class EvaluationError(MagnetError, ValueError):
    """A metric precondition does not hold for the given inputs."""


class ReportError(MagnetError, ValueError):
    """A report cannot be serialized (for example it holds NaN)."""

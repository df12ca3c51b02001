"""
Embedding vectors, cosine similarity and text embedders.

The default text embedder is a hashed bag of words so that every metric can
run without a model. Its output is part of the report contract: tokenization,
hash and bucket count are versioned by HASHED_BOW_VERSION.
"""
import hashlib
import logging
import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Protocol, Sequence, Tuple

import numpy as np

from .exceptions import DimensionError, EmbeddingError, InvariantError

logger = logging.getLogger(__name__)

HASHED_BOW_VERSION = "hbow-v1"
DEFAULT_EMBEDDING_DIM = 256

_TOKEN_PATTERN = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension vector of finite reals."""

    values: Tuple[float, ...]

    def __post_init__(self):
        try:
            values = tuple(float(value) for value in self.values)
        except (TypeError, ValueError):
            raise InvariantError("embedding values must be numbers")
        if any(isinstance(value, bool) for value in self.values):
            raise InvariantError("embedding values must be numbers")
        if not values:
            raise InvariantError("embedding must have dimension >= 1")
        if not all(math.isfinite(value) for value in values):
            raise InvariantError("embedding values must be finite")
        object.__setattr__(self, 'values', values)

    @property
    def dim(self):
        return len(self.values)

    def as_array(self):
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_array(cls, array: Iterable[float]) -> "EmbeddingVector":
        return cls(tuple(float(value) for value in np.asarray(array, dtype=np.float64).ravel()))


def cosine_similarity(u, v) -> float:
    """
    Cosine of two vectors; 0.0 when either has zero norm.

    Accepts EmbeddingVector or anything numpy can turn into a 1-d array.
    """
    a = u.as_array() if isinstance(u, EmbeddingVector) else np.asarray(u, dtype=np.float64)
    b = v.as_array() if isinstance(v, EmbeddingVector) else np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare vectors of dimension {a.size} and {b.size}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def tokenize(text: str) -> List[str]:
    """Lowercase, then split on runs of non-alphanumeric characters."""
    return _TOKEN_PATTERN.findall(text.lower())


class TextEmbedder(Protocol):
    """Anything with a dimension and a deterministic embed(text)."""

    dimension: int

    def embed(self, text: str) -> EmbeddingVector:
        ...


class HashedBagOfWordsEmbedder:
    """
    Deterministic bag-of-words embedder.

    Each token is hashed with 64-bit BLAKE2b, taken modulo the dimension, and
    counted; the count vector is L2-normalized. The empty token stream maps to
    the zero vector.
    """

    version = HASHED_BOW_VERSION

    def __init__(self, dimension: int = DEFAULT_EMBEDDING_DIM):
        if dimension < 1:
            raise InvariantError(f"embedding dimension must be >= 1, got {dimension}")
        self.dimension = dimension

    def bucket(self, token):
        digest = hashlib.blake2b(token.encode('utf-8'), digest_size=8).digest()
        return int.from_bytes(digest, 'big') % self.dimension

    def embed(self, text: str) -> EmbeddingVector:
        if not isinstance(text, str):
            raise EmbeddingError(repr(text), "text must be a string")
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            counts[self.bucket(token)] += 1.0
        norm = float(np.linalg.norm(counts))
        if norm > 0:
            counts /= norm
        return EmbeddingVector.from_array(counts)


class PrecomputedTextEmbedder:
    """Looks texts up in a table of precomputed sentence embeddings."""

    def __init__(self, table: Mapping[str, EmbeddingVector]):
        dims = {vector.dim for vector in table.values()}
        if len(dims) > 1:
            raise DimensionError(f"precomputed text embeddings mix dimensions {sorted(dims)}")
        self.dimension = dims.pop() if dims else 0
        self._table: Dict[str, EmbeddingVector] = dict(table)

    def __len__(self):
        return len(self._table)

    def embed(self, text: str) -> EmbeddingVector:
        try:
            return self._table[text]
        except KeyError:
            raise EmbeddingError(text, "no precomputed embedding for this text")


def default_embedder() -> HashedBagOfWordsEmbedder:
    """The model-free embedder used whenever no embedding table is supplied."""
    return HashedBagOfWordsEmbedder(DEFAULT_EMBEDDING_DIM)


def embed_texts(texts: Sequence[str], embedder: TextEmbedder) -> np.ndarray:
    """Embed texts into a (len(texts), D) matrix, naming the text on failure."""
    rows = []
    for text in texts:
        try:
            rows.append(embedder.embed(text).as_array())
        except EmbeddingError:
            raise
        except Exception as e:
            logger.error(f"Embedder failed on text {text!r}: {e}")
            raise EmbeddingError(text, str(e)) from e
    dims = {row.size for row in rows}
    if len(dims) > 1:
        raise DimensionError(f"embedder returned vectors of dimensions {sorted(dims)}")
    return np.vstack(rows) if rows else np.zeros((0, 0))


def cosine_matrix(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Pairwise cosine of the rows of two matrices; zero rows give 0."""
    left_norms = np.linalg.norm(left, axis=1)
    right_norms = np.linalg.norm(right, axis=1)
    safe_left = np.where(left_norms > 0, left_norms, 1.0)
    safe_right = np.where(right_norms > 0, right_norms, 1.0)
    values = (left / safe_left[:, None]) @ (right / safe_right[:, None]).T
    values[left_norms == 0, :] = 0.0
    values[:, right_norms == 0] = 0.0
    return np.clip(values, -1.0, 1.0)

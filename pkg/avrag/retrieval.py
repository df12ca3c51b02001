"""
AV-RAG retrieval: Hadamard fusion, per-video scoring against the fused
audio-visual and caption embeddings, top-k selection and recall@k.

Embeddings are precomputed and loaded from the index file; nothing here calls
a model.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .embedding import EmbeddingVector, cosine_matrix
from .exceptions import DimensionError, EvaluationError, InvariantError

logger = logging.getLogger(__name__)

RECALL_DENOMINATORS = ("capped", "relevant")


def hadamard_fuse(audio: EmbeddingVector, visual: EmbeddingVector) -> EmbeddingVector:
    """Element-wise product of two equal-dimension embeddings."""
    if audio.dim != visual.dim:
        raise DimensionError(f"cannot fuse audio dimension {audio.dim} with visual dimension {visual.dim}")
    return EmbeddingVector.from_array(audio.as_array() * visual.as_array())


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    av_embedding: EmbeddingVector
    caption_embedding: EmbeddingVector

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id.strip():
            raise InvariantError("video_id must be a non-empty string")
        object.__setattr__(self, 'video_id', self.video_id.strip())
        if self.av_embedding.dim != self.caption_embedding.dim:
            raise DimensionError(
                f"video {self.video_id}: av dimension {self.av_embedding.dim} "
                f"differs from caption dimension {self.caption_embedding.dim}"
            )


@dataclass(frozen=True)
class RetrievalIndex:
    """Cached per-video embeddings; ids unique, one dimension throughout."""

    dimension: int
    entries: Tuple[VideoEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        if isinstance(self.dimension, bool) or not isinstance(self.dimension, int) or self.dimension < 1:
            raise InvariantError(f"index dimension must be a positive integer, got {self.dimension!r}")
        seen = set()
        for entry in entries:
            if entry.video_id in seen:
                raise InvariantError(f"duplicate video_id {entry.video_id} in index")
            seen.add(entry.video_id)
            if entry.av_embedding.dim != self.dimension:
                raise DimensionError(
                    f"video {entry.video_id}: embedding dimension {entry.av_embedding.dim} "
                    f"does not match index dimension {self.dimension}"
                )
        object.__setattr__(self, 'entries', entries)

    @property
    def video_ids(self):
        return tuple(entry.video_id for entry in self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class VideoScore:
    s_av: float
    s_cap: float
    sim_avg: float


@dataclass(frozen=True)
class ScoreTable:
    """Per-video scores and the ranking by sim_avg (ties by video_id)."""

    scores: Mapping[str, VideoScore]
    ranking: Tuple[str, ...]


def score_videos(query_embedding: EmbeddingVector, index: RetrievalIndex) -> ScoreTable:
    """
    Score every video in the index against a query embedding.

    Args:
        query_embedding: query vector of the index dimension
        index: retrieval index

    Returns:
        ScoreTable with s_av, s_cap, sim_avg per video and a deterministic ranking
    """
    if query_embedding.dim != index.dimension:
        raise DimensionError(
            f"query dimension {query_embedding.dim} does not match index dimension {index.dimension}"
        )
    if not index.entries:
        return ScoreTable(scores={}, ranking=())

    query = query_embedding.as_array()[None, :]
    av = np.vstack([entry.av_embedding.as_array() for entry in index.entries])
    cap = np.vstack([entry.caption_embedding.as_array() for entry in index.entries])
    s_av = cosine_matrix(query, av)[0]
    s_cap = cosine_matrix(query, cap)[0]
    sim_avg = (s_av + s_cap) / 2.0

    scores = {}
    for position, entry in enumerate(index.entries):
        scores[entry.video_id] = VideoScore(
            s_av=float(s_av[position]),
            s_cap=float(s_cap[position]),
            sim_avg=float(sim_avg[position]),
        )
    ranking = tuple(sorted(scores, key=lambda video_id: (-scores[video_id].sim_avg, video_id)))
    logger.debug(f"Scored {len(ranking)} videos, best {ranking[0]} ({scores[ranking[0]].sim_avg:.4f})")
    return ScoreTable(scores=scores, ranking=ranking)


def top_k(table: ScoreTable, k: int) -> List[str]:
    """First k video ids of the ranking."""
    total = len(table.ranking)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1 or k > total:
        raise EvaluationError(f"top-k needs 1 <= k <= {total}, got {k}")
    return list(table.ranking[:k])


def recall_at_k(
    ranking: Sequence[str],
    relevant: Iterable[str],
    ks: Sequence[int],
    denominator: str = "capped",
) -> Dict[int, float]:
    """
    Recall of the relevant videos within the first k ranks, for each k.

    With the "capped" denominator a query is divided by min(k, |relevant|);
    with "relevant" by |relevant|.
    """
    relevant_set = {video_id.strip() for video_id in relevant}
    if not relevant_set:
        raise EvaluationError("relevant set is empty")
    if denominator not in RECALL_DENOMINATORS:
        raise EvaluationError(f"unknown recall denominator {denominator!r}")
    results = {}
    for k in ks:
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise EvaluationError(f"recall cut-off must be a positive integer, got {k!r}")
        hits = len(set(ranking[:k]) & relevant_set)
        if denominator == "capped":
            results[k] = hits / min(k, len(relevant_set))
        else:
            results[k] = hits / len(relevant_set)
    return results


def mean_recall(per_query: Sequence[Mapping[int, float]], ks: Sequence[int]) -> Dict[int, float]:
    """Mean over queries of each R@k, summed in input order."""
    if not per_query:
        raise EvaluationError("no queries to aggregate")
    return {k: sum(recall[k] for recall in per_query) / len(per_query) for k in ks}

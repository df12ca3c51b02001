"""
Salient frame selection.

An affinity matrix Q = Gamma + Delta combines pairwise frame cosine similarity
(Gamma) with a temporal separation penalty (Delta). A dynamic program then
picks k ascending frame indices minimizing the summed affinity of consecutive
selections. Frame indices are 1-based throughout.
"""
import enum
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .embedding import EmbeddingVector
from .exceptions import DimensionError, EvaluationError, InvariantError
from .retrieval import hadamard_fuse

logger = logging.getLogger(__name__)

# denominator clamp for the literal (integer distance) sine penalty
RAW_DISTANCE_EPSILON = 1e-6


class PenaltyKind(str, enum.Enum):
    SINE = "sine"
    COSINE = "cosine"
    EXP = "exp"
    NONE = "none"


def separation_penalty(
    distance: float,
    kind: PenaltyKind,
    gamma: float,
    lam: float = 5.0,
    clamp: bool = False,
) -> float:
    """
    Temporal separation penalty for one frame pair.

    Args:
        distance: |a - b| / m normally, or the raw |a - b| in compatibility mode
        kind: penalty function
        gamma: penalty factor
        lam: exponential rate (exp only)
        clamp: clamp the sine denominator away from zero

    Returns:
        Delta for the pair
    """
    kind = PenaltyKind(kind)
    if kind is PenaltyKind.NONE:
        return 0.0
    angle = math.pi * distance / 2.0
    if kind is PenaltyKind.SINE:
        denominator = math.sin(angle) + 1.0
        if clamp and abs(denominator) < RAW_DISTANCE_EPSILON:
            denominator = RAW_DISTANCE_EPSILON
        return gamma * (1.0 / denominator - 1.0)
    if kind is PenaltyKind.COSINE:
        return gamma * (math.cos(angle) - 1.0)
    return gamma * (math.exp(lam * distance) - 1.0)


@dataclass(frozen=True)
class AffinityMatrix:
    """m x m matrix Q = Gamma + Delta and the parameters that built it."""

    m: int
    q: np.ndarray
    gamma: float
    penalty_kind: PenaltyKind
    lam: Optional[float] = None
    raw_index_distance: bool = False
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.shape != (self.m, self.m):
            raise InvariantError(f"affinity matrix must be {self.m}x{self.m}, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise InvariantError("affinity matrix holds non-finite values")
        q.setflags(write=False)
        object.__setattr__(self, 'q', q)

    def entry(self, a, b):
        """Q[a][b] for 1-based frame indices."""
        return float(self.q[a - 1, b - 1])


@dataclass(frozen=True)
class SelectionPlan:
    """DP tables and the selected 1-based frame indices."""

    k: int
    cost_table: np.ndarray
    backtrack: np.ndarray
    selected: Tuple[int, ...]
    cost: float
    end_frame: int


def fuse_frame_streams(
    audio: Sequence[EmbeddingVector],
    visual: Sequence[EmbeddingVector],
) -> List[EmbeddingVector]:
    """Hadamard-fuse per-frame audio and visual embeddings."""
    if len(audio) != len(visual):
        raise DimensionError(f"audio stream has {len(audio)} frames, visual stream has {len(visual)}")
    return [hadamard_fuse(a, v) for a, v in zip(audio, visual)]


def build_affinity(
    frames: Sequence[EmbeddingVector],
    gamma: float,
    penalty_kind=PenaltyKind.SINE,
    lam: Optional[float] = None,
    raw_index_distance: bool = False,
) -> AffinityMatrix:
    """
    Build Q = Gamma + Delta for the given frame embeddings.

    Gamma is pairwise cosine (a zero-norm frame has cosine 0 with everything,
    itself included). Delta uses the normalized distance |a - b| / m unless
    raw_index_distance is set; the diagonal penalty is 0.
    """
    kind = PenaltyKind(penalty_kind)
    m = len(frames)
    if m < 2:
        raise EvaluationError(f"frame selection needs at least 2 frames, got {m}")
    dims = {frame.dim for frame in frames}
    if len(dims) != 1:
        raise DimensionError(f"frame embeddings mix dimensions {sorted(dims)}")
    if not math.isfinite(gamma) or gamma < 0:
        raise EvaluationError(f"gamma must be a finite value >= 0, got {gamma}")
    if kind is PenaltyKind.EXP:
        lam = 5.0 if lam is None else lam
        if not math.isfinite(lam):
            raise EvaluationError(f"lambda must be finite, got {lam}")

    z = np.vstack([frame.as_array() for frame in frames])
    norms = np.linalg.norm(z, axis=1)
    warnings = []
    for position in np.flatnonzero(norms == 0):
        message = f"frame {position + 1} has a zero-norm embedding; its similarities are set to 0"
        logger.warning(message)
        warnings.append(message)
    unit = z / np.where(norms > 0, norms, 1.0)[:, None]
    gamma_matrix = unit @ unit.T
    gamma_matrix = np.clip((gamma_matrix + gamma_matrix.T) / 2.0, -1.0, 1.0)
    gamma_matrix[norms == 0, :] = 0.0
    gamma_matrix[:, norms == 0] = 0.0

    delta = np.zeros((m, m), dtype=np.float64)
    if kind is not PenaltyKind.NONE:
        try:
            for a in range(m):
                for b in range(a + 1, m):
                    distance = float(b - a) if raw_index_distance else (b - a) / m
                    value = separation_penalty(distance, kind, gamma, lam if lam is not None else 5.0,
                                               clamp=raw_index_distance)
                    delta[a, b] = value
                    delta[b, a] = value
        except OverflowError:
            raise EvaluationError("affinity matrix overflowed; reduce gamma or lambda")

    q = gamma_matrix + delta
    if not np.all(np.isfinite(q)):
        raise EvaluationError("affinity matrix overflowed; reduce gamma or lambda")
    logger.debug(f"Built {m}x{m} affinity matrix ({kind.value}, gamma={gamma}, lambda={lam})")
    return AffinityMatrix(
        m=m,
        q=q,
        gamma=float(gamma),
        penalty_kind=kind,
        lam=float(lam) if kind is PenaltyKind.EXP else None,
        raw_index_distance=raw_index_distance,
        warnings=tuple(warnings),
    )


def affinity_from_matrix(q, penalty_kind=PenaltyKind.NONE, gamma: float = 0.0) -> AffinityMatrix:
    """Wrap a precomputed m x m matrix so select_frames can run on it."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvariantError(f"affinity matrix must be square, got shape {q.shape}")
    return AffinityMatrix(m=q.shape[0], q=q, gamma=gamma, penalty_kind=PenaltyKind(penalty_kind))


def select_frames(affinity: AffinityMatrix, k: int, free_endpoint: bool = False) -> SelectionPlan:
    """
    Exact DP over ascending k-chains.

    C[0][0] = 0, every other cell starts at infinity; C[i][j] relaxes over
    p in j-1..i-1 with C[p][j-1] + Q[p][i], where Q[0][i] = 0. Relaxation is
    strict, scanning p upwards, so the smallest optimal p wins. Backtracking
    starts at (m, k), or at the best C[i][k] when free_endpoint is set.
    """
    m = affinity.m
    if isinstance(k, bool) or not isinstance(k, int) or k < 1 or k > m:
        raise EvaluationError(f"frame selection needs 1 <= k <= m = {m}, got k = {k}")

    padded = np.zeros((m + 1, m + 1), dtype=np.float64)
    padded[1:, 1:] = affinity.q
    cost = np.full((m + 1, k + 1), np.inf)
    backtrack = np.full((m + 1, k + 1), -1, dtype=np.int64)
    cost[0, 0] = 0.0

    for j in range(1, k + 1):
        for i in range(j, m + 1):
            candidates = cost[j - 1:i, j - 1] + padded[j - 1:i, i]
            best = int(np.argmin(candidates))
            if candidates[best] < cost[i, j]:
                cost[i, j] = candidates[best]
                backtrack[i, j] = best + j - 1

    if free_endpoint:
        end = k + int(np.argmin(cost[k:, k]))
    else:
        end = m
    if not np.isfinite(cost[end, k]):
        raise RuntimeError(f"frame selection table has no finite cost at ({end}, {k})")

    selected = []
    i, j = end, k
    while j > 0:
        selected.append(i)
        i = int(backtrack[i, j])
        j -= 1
    selected.reverse()

    cost.setflags(write=False)
    backtrack.setflags(write=False)
    return SelectionPlan(
        k=k,
        cost_table=cost,
        backtrack=backtrack,
        selected=tuple(selected),
        cost=float(cost[end, k]),
        end_frame=end,
    )


def chain_cost(affinity: AffinityMatrix, indices: Sequence[int]) -> float:
    """Summed Q over consecutive selected indices (1-based), added left to right."""
    total = 0.0
    for a, b in zip(indices, indices[1:]):
        total += affinity.entry(a, b)
    return total


def uniform_sample_indices(total_frames: int, m: int) -> List[int]:
    """
    m evenly spaced 1-based indices over 1..total_frames.

    With m >= 2 the first and last frames are included and positions are
    rounded half up; m = 1 takes the midpoint (total_frames + 1) // 2.
    """
    if total_frames < 1 or m < 1:
        raise EvaluationError(f"uniform sampling needs total_frames >= 1 and m >= 1, got {total_frames}, {m}")
    if m > total_frames:
        raise EvaluationError(f"cannot sample {m} frames from {total_frames}")
    if m == 1:
        return [(total_frames + 1) // 2]
    step = (total_frames - 1) / (m - 1)
    return [int(math.floor(1 + t * step + 0.5)) for t in range(m)]

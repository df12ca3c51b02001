"""
Step-wise error metric (StEM)

Ground-truth and predicted steps are aligned by Hungarian assignment on text
similarity (cost 1 - sim, rectangular inputs padded with cost 1). Assigned
pairs below tau_s are dropped. The remaining pairs yield the counts:

    S_M   unmatched ground-truth steps            / n
    S_H   unmatched predicted steps               / m
    S_O   matched pairs with gt index != pred idx / |pairs|
    S_FP  predicted groundings whose video the matched GT step does not cite
                                                  / predicted groundings in matched steps
    S_FN  GT groundings whose video the matched predicted step does not cite
                                                  / GT groundings in matched steps

0/0 is 0. Each predicted grounding whose video is cited on both sides adds one
IoU value between the per-video interval unions.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from avrag.core import Step, interval_set_iou, normalize_interval_set
from avrag.embedding import TextEmbedder, cosine_matrix, embed_texts
from avrag.exceptions import EvaluationError, InvariantError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityMatrix:
    """n x m cosine similarities, rows ground truth, columns predictions."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvariantError(f"similarity matrix must be 2-d, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvariantError("similarity matrix holds non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MatchSet:
    """Assigned (gt_index, pred_index, similarity) pairs, 1-based, all >= threshold."""

    pairs: Tuple[Tuple[int, int, float], ...]
    threshold: float

    def __post_init__(self):
        pairs = tuple(sorted(self.pairs))
        gt_seen, pred_seen = set(), set()
        for gt_index, pred_index, similarity in pairs:
            if gt_index in gt_seen or pred_index in pred_seen:
                raise InvariantError(f"step matched twice in pair ({gt_index}, {pred_index})")
            if similarity < self.threshold:
                raise InvariantError(f"pair ({gt_index}, {pred_index}) falls below threshold {self.threshold}")
            gt_seen.add(gt_index)
            pred_seen.add(pred_index)
        object.__setattr__(self, 'pairs', pairs)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class StemReport:
    n_gt: int
    n_pred: int
    matched: int
    missing: int
    hallucinated: int
    wrong_order: int
    grounding_fp: int
    grounding_fn: int
    fp_denominator: int
    fn_denominator: int
    iou_values: Tuple[float, ...]
    sm: float
    sh: float
    so: float
    sfp: float
    sfn: float
    s_iou_mean: float
    pairs: Tuple[Tuple[int, int, float], ...] = ()

    def as_dict(self, include_pairs: bool = False) -> dict:
        report = {
            'S_M': self.missing,
            'S_H': self.hallucinated,
            'S_O': self.wrong_order,
            'S_FP': self.grounding_fp,
            'S_FN': self.grounding_fn,
            'n_gt': self.n_gt,
            'n_pred': self.n_pred,
            'matched': self.matched,
            'iou_count': len(self.iou_values),
            'sm': self.sm,
            'sh': self.sh,
            'so': self.so,
            'sfp': self.sfp,
            'sfn': self.sfn,
            's_iou_mean': self.s_iou_mean,
        }
        if include_pairs:
            report['pairs'] = [
                {'gt': gt_index, 'pred': pred_index, 'similarity': similarity}
                for gt_index, pred_index, similarity in self.pairs
            ]
        return report


def _ratio(count, denominator) -> float:
    return count / denominator if denominator else 0.0


def text_similarity_matrix(gt_texts: Sequence[str], pred_texts: Sequence[str], embedder: TextEmbedder) -> SimilarityMatrix:
    """Cosine of every (ground truth, prediction) text pair; a zero vector gives 0."""
    if not gt_texts or not pred_texts:
        raise EvaluationError("similarity matrix needs at least one text on each side")
    gt = embed_texts(gt_texts, embedder)
    pred = embed_texts(pred_texts, embedder)
    return SimilarityMatrix(cosine_matrix(gt, pred))


def solve_assignment(sim: SimilarityMatrix) -> Tuple[List[Tuple[int, int]], float]:
    """
    Max-similarity assignment of rows to columns, before any threshold.

    Returns the 0-based (row, col) pairs between real rows and columns and
    their total similarity.
    """
    n, m = sim.rows, sim.cols
    size = max(n, m)
    cost = np.ones((size, size), dtype=np.float64)
    cost[:n, :m] = 1.0 - sim.values
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if r < n and c < m]
    total = sum(float(sim.values[r, c]) for r, c in pairs)
    return pairs, total


def hungarian_match(sim: SimilarityMatrix, tau_s: float) -> MatchSet:
    """Assignment on cost 1 - sim, then pairs with similarity < tau_s are dropped."""
    if not 0.0 <= tau_s <= 1.0:
        raise EvaluationError(f"tau_s must lie in [0, 1], got {tau_s}")
    if sim.rows == 0 or sim.cols == 0:
        return MatchSet(pairs=(), threshold=tau_s)
    pairs, _ = solve_assignment(sim)
    kept = tuple(
        (r + 1, c + 1, float(sim.values[r, c]))
        for r, c in pairs
        if sim.values[r, c] >= tau_s
    )
    return MatchSet(pairs=kept, threshold=tau_s)


def _video_union(step: Step, video_id: str):
    return normalize_interval_set([g.interval for g in step.groundings if g.video_id == video_id])


def stem_evaluate(gt: Sequence[Step], pred: Sequence[Step], tau_s: float, embedder: TextEmbedder) -> StemReport:
    """
    Score one predicted step list against its ground truth.

    Args:
        gt: ground-truth steps, non-empty
        pred: predicted steps, may be empty
        tau_s: text similarity threshold in [0, 1]
        embedder: text embedder for step similarity

    Returns:
        StemReport with raw counts and normalized ratios
    """
    if not gt:
        raise EvaluationError("ground truth has no steps")
    if not 0.0 <= tau_s <= 1.0:
        raise EvaluationError(f"tau_s must lie in [0, 1], got {tau_s}")
    n, m = len(gt), len(pred)

    if pred:
        sim = text_similarity_matrix([s.text for s in gt], [s.text for s in pred], embedder)
        matches = hungarian_match(sim, tau_s)
    else:
        matches = MatchSet(pairs=(), threshold=tau_s)

    wrong_order = fp = fn = fp_denominator = fn_denominator = 0
    iou_values = []
    for gt_index, pred_index, _ in matches.pairs:
        if gt_index != pred_index:
            wrong_order += 1
        gt_step = gt[gt_index - 1]
        pred_step = pred[pred_index - 1]
        gt_videos = set(gt_step.video_ids)
        pred_videos = set(pred_step.video_ids)

        for grounding in pred_step.groundings:
            fp_denominator += 1
            if grounding.video_id not in gt_videos:
                fp += 1
            else:
                iou_values.append(interval_set_iou(
                    _video_union(gt_step, grounding.video_id),
                    _video_union(pred_step, grounding.video_id),
                ))
        for grounding in gt_step.groundings:
            fn_denominator += 1
            if grounding.video_id not in pred_videos:
                fn += 1

    matched = len(matches)
    missing = n - matched
    hallucinated = m - matched
    s_iou_mean = math.fsum(iou_values) / len(iou_values) if iou_values else 0.0
    return StemReport(
        n_gt=n,
        n_pred=m,
        matched=matched,
        missing=missing,
        hallucinated=hallucinated,
        wrong_order=wrong_order,
        grounding_fp=fp,
        grounding_fn=fn,
        fp_denominator=fp_denominator,
        fn_denominator=fn_denominator,
        iou_values=tuple(iou_values),
        sm=_ratio(missing, n),
        sh=_ratio(hallucinated, m),
        so=_ratio(wrong_order, matched),
        sfp=_ratio(fp, fp_denominator),
        sfn=_ratio(fn, fn_denominator),
        s_iou_mean=s_iou_mean,
        pairs=matches.pairs,
    )


def stem_aggregate(reports: Sequence[StemReport]) -> StemReport:
    """Mean of the normalized fields, sum of the raw counts."""
    if not reports:
        raise EvaluationError("no StEM reports to aggregate")
    count = len(reports)

    def mean(name):
        return math.fsum(getattr(report, name) for report in reports) / count

    def total(name):
        return sum(getattr(report, name) for report in reports)

    return StemReport(
        n_gt=total('n_gt'),
        n_pred=total('n_pred'),
        matched=total('matched'),
        missing=total('missing'),
        hallucinated=total('hallucinated'),
        wrong_order=total('wrong_order'),
        grounding_fp=total('grounding_fp'),
        grounding_fn=total('grounding_fn'),
        fp_denominator=total('fp_denominator'),
        fn_denominator=total('fn_denominator'),
        iou_values=tuple(value for report in reports for value in report.iou_values),
        sm=mean('sm'),
        sh=mean('sh'),
        so=mean('so'),
        sfp=mean('sfp'),
        sfn=mean('sfn'),
        s_iou_mean=mean('s_iou_mean'),
    )

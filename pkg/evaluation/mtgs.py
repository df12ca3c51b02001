"""
Matched Temporal Grounding Score.

Per query, groundings are grouped by video and merged into interval sets.
Only videos cited by both ground truth and prediction are scored; the query
score is their mean IoU, and exactly 0 when no video is shared.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

from avrag.core import IntervalSet, Step, interval_set_iou, normalize_interval_set
from avrag.exceptions import EvaluationError

logger = logging.getLogger(__name__)

GroundingMap = Dict[str, IntervalSet]


@dataclass(frozen=True)
class MtgsReport:
    per_video_iou: Dict[str, float]
    matched_ids: Tuple[str, ...]
    score: float
    gt_only_ids: Tuple[str, ...] = ()
    pred_only_ids: Tuple[str, ...] = ()
    empty_ground_truth: bool = False

    def as_dict(self, include_videos: bool = False) -> dict:
        report = {
            'score': self.score,
            'matched': len(self.matched_ids),
            'empty_ground_truth': self.empty_ground_truth,
        }
        if include_videos:
            report['per_video_iou'] = dict(self.per_video_iou)
            report['gt_only'] = list(self.gt_only_ids)
            report['pred_only'] = list(self.pred_only_ids)
        return report


def collect_groundings(steps: Sequence[Step]) -> GroundingMap:
    """All groundings of a step list, merged per video_id."""
    grouped = defaultdict(list)
    for step in steps:
        for grounding in step.groundings:
            grouped[grounding.video_id].append(grounding.interval)
    return {video_id: normalize_interval_set(grouped[video_id]) for video_id in sorted(grouped)}


def mtgs_per_query(gt: GroundingMap, pred: GroundingMap) -> MtgsReport:
    matched = tuple(sorted(set(gt) & set(pred)))
    per_video = {video_id: interval_set_iou(gt[video_id], pred[video_id]) for video_id in matched}
    score = math.fsum(per_video.values()) / len(matched) if matched else 0.0
    return MtgsReport(
        per_video_iou=per_video,
        matched_ids=matched,
        score=score,
        gt_only_ids=tuple(sorted(set(gt) - set(pred))),
        pred_only_ids=tuple(sorted(set(pred) - set(gt))),
        empty_ground_truth=not gt,
    )


def mtgs_avg(reports: Sequence[MtgsReport]) -> float:
    if not reports:
        raise EvaluationError("no MTGS reports to average")
    return math.fsum(report.score for report in reports) / len(reports)


def iou_threshold_rates(reports: Sequence[MtgsReport], thresholds: Sequence[float]) -> Dict[float, float]:
    """Share of matched videos, pooled over queries, whose IoU reaches each threshold."""
    pooled = [iou for report in reports for iou in report.per_video_iou.values()]
    if not pooled:
        return {threshold: 0.0 for threshold in thresholds}
    return {threshold: sum(1 for iou in pooled if iou >= threshold) / len(pooled) for threshold in thresholds}

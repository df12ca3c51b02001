"""
Domain types shared by retrieval, agents and evaluation, plus the interval
arithmetic used by MTGS and StEM.

All types are frozen dataclasses; construction validates invariants and raises
InvariantError, so a constructed object is always valid.
"""
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .exceptions import InvariantError


@dataclass(frozen=True)
class TimeInterval:
    """Closed time range in seconds with strictly positive duration."""

    start_s: float
    end_s: float

    def __post_init__(self):
        start, end = self.start_s, self.end_s
        if isinstance(start, bool) or isinstance(end, bool):
            raise InvariantError("interval bounds must be numbers")
        try:
            start, end = float(start), float(end)
        except (TypeError, ValueError):
            raise InvariantError(f"interval bounds must be numbers, got {self.start_s!r}, {self.end_s!r}")
        if not (math.isfinite(start) and math.isfinite(end)):
            raise InvariantError(f"interval bounds must be finite, got [{start}, {end}]")
        if start < 0:
            raise InvariantError(f"interval start must be >= 0, got {start}")
        if end <= start:
            raise InvariantError(f"interval end must be greater than start, got [{start}, {end}]")
        object.__setattr__(self, 'start_s', start)
        object.__setattr__(self, 'end_s', end)

    @property
    def duration(self):
        return self.end_s - self.start_s


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, pairwise disjoint intervals. Build it with normalize_interval_set."""

    intervals: Tuple[TimeInterval, ...] = ()

    def __post_init__(self):
        intervals = tuple(self.intervals)
        for previous, current in zip(intervals, intervals[1:]):
            if current.start_s <= previous.end_s:
                raise InvariantError(
                    "interval set is not normalized: "
                    f"[{previous.start_s}, {previous.end_s}] touches or overlaps [{current.start_s}, {current.end_s}]"
                )
        object.__setattr__(self, 'intervals', intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)


@dataclass(frozen=True)
class Grounding:
    """A (video_id, interval) evidence reference."""

    video_id: str
    interval: TimeInterval

    def __post_init__(self):
        if not isinstance(self.video_id, str):
            raise InvariantError(f"video_id must be a string, got {self.video_id!r}")
        # ids are opaque; surrounding whitespace never distinguishes two videos
        video_id = self.video_id.strip()
        if not video_id:
            raise InvariantError("video_id must be non-empty")
        if not isinstance(self.interval, TimeInterval):
            raise InvariantError("grounding interval must be a TimeInterval")
        object.__setattr__(self, 'video_id', video_id)


@dataclass(frozen=True)
class Step:
    """One answer step: 1-based ordinal, free text and its groundings."""

    index: int
    text: str
    groundings: Tuple[Grounding, ...] = ()

    def __post_init__(self):
        if isinstance(self.index, bool) or not isinstance(self.index, int) or self.index < 1:
            raise InvariantError(f"step index must be an integer >= 1, got {self.index!r}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise InvariantError(f"step {self.index} text must be non-empty")
        object.__setattr__(self, 'groundings', tuple(self.groundings))

    @property
    def video_ids(self):
        seen = []
        for grounding in self.groundings:
            if grounding.video_id not in seen:
                seen.append(grounding.video_id)
        return tuple(seen)


@dataclass(frozen=True)
class QAItem:
    """A question with its ordered answer steps (indices 1..n)."""

    id: str
    question: str
    steps: Tuple[Step, ...] = ()
    answer: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id.strip():
            raise InvariantError("record id must be a non-empty string")
        if not isinstance(self.question, str):
            raise InvariantError(f"question of record {self.id} must be a string")
        steps = tuple(self.steps)
        for position, step in enumerate(steps, 1):
            if step.index != position:
                raise InvariantError(
                    f"record {self.id}: step indices must be contiguous from 1, "
                    f"found {step.index} at position {position}"
                )
        if self.answer is not None and not isinstance(self.answer, str):
            raise InvariantError(f"answer of record {self.id} must be a string")
        object.__setattr__(self, 'steps', steps)

    def answer_text(self, separator="\n"):
        """Flat answer used by the text metrics."""
        if self.answer is not None:
            return self.answer
        return separator.join(step.text for step in self.steps)


def renumber_steps(texts_and_groundings: Iterable[Tuple[str, Sequence[Grounding]]]) -> Tuple[Step, ...]:
    """Build contiguous steps 1..n from (text, groundings) pairs."""
    return tuple(
        Step(index=position, text=text, groundings=tuple(groundings))
        for position, (text, groundings) in enumerate(texts_and_groundings, 1)
    )


def normalize_interval_set(raw: Iterable[TimeInterval]) -> IntervalSet:
    """
    Merge overlapping and touching intervals into a sorted disjoint set.

    Args:
        raw: intervals in any order

    Returns:
        IntervalSet covering exactly the union of the inputs
    """
    items = list(raw)
    for interval in items:
        if not isinstance(interval, TimeInterval):
            raise InvariantError(f"expected TimeInterval, got {interval!r}")
    if not items:
        return IntervalSet(())

    items.sort(key=lambda interval: (interval.start_s, interval.end_s))
    merged: List[Tuple[float, float]] = []
    current_start, current_end = items[0].start_s, items[0].end_s
    for interval in items[1:]:
        if interval.start_s <= current_end:
            current_end = max(current_end, interval.end_s)
        else:
            merged.append((current_start, current_end))
            current_start, current_end = interval.start_s, interval.end_s
    merged.append((current_start, current_end))
    return IntervalSet(tuple(TimeInterval(start, end) for start, end in merged))


def total_duration(interval_set: IntervalSet) -> float:
    """Sum of interval lengths; 0 for the empty set."""
    return sum((interval.duration for interval in interval_set), 0.0)


def interval_set_union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return normalize_interval_set(list(a) + list(b))


def interval_set_intersection(a: IntervalSet, b: IntervalSet) -> List[Tuple[float, float]]:
    """Overlap pieces of two normalized sets (two-pointer sweep)."""
    left, right = list(a), list(b)
    pieces = []
    i = j = 0
    while i < len(left) and j < len(right):
        start = max(left[i].start_s, right[j].start_s)
        end = min(left[i].end_s, right[j].end_s)
        if end > start:
            pieces.append((start, end))
        if left[i].end_s < right[j].end_s:
            i += 1
        else:
            j += 1
    return pieces


def interval_set_iou(a: IntervalSet, b: IntervalSet) -> float:
    """
    Duration(intersection) / Duration(union) of two normalized sets.

    Two empty sets give 0.0.
    """
    union = total_duration(interval_set_union(a, b))
    if union <= 0:
        return 0.0
    intersection = sum((end - start for start, end in interval_set_intersection(a, b)), 0.0)
    return min(1.0, intersection / union)

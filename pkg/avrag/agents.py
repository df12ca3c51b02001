"""
Multi-agent grounded question answering

One agent is spawned per retrieved video. Each agent returns candidate
windows (interval, relevance score, snippet) found in that video's context;
the meta-aggregator merges all windows into a step-wise grounded answer.

Agents here are deterministic. MockTranscriptAgent scores transcript
segments by embedder cosine with the query; any other VideoAgent subclass
(for example one calling a remote model) plugs into run_pipeline unchanged.
"""
import abc
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

from .core import (
    Grounding,
    QAItem,
    Step,
    TimeInterval,
    interval_set_iou,
    normalize_interval_set,
)
from .embedding import EmbeddingVector, TextEmbedder, cosine_similarity
from .exceptions import EvaluationError, InvariantError
from .retrieval import RetrievalIndex, score_videos, top_k

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TranscriptSegment:
    interval: TimeInterval
    text: str

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise InvariantError("transcript segment text must be non-empty")


@dataclass(frozen=True)
class VideoContext:
    """Everything a spawned agent sees for one video."""

    video_id: str
    segments: Tuple[TranscriptSegment, ...] = ()
    frames: Optional[Tuple[EmbeddingVector, ...]] = None
    selected_frames: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id.strip():
            raise InvariantError("video_id must be a non-empty string")
        object.__setattr__(self, 'video_id', self.video_id.strip())
        segments = tuple(sorted(self.segments, key=lambda s: (s.interval.start_s, s.interval.end_s)))
        object.__setattr__(self, 'segments', segments)
        if self.frames is not None:
            object.__setattr__(self, 'frames', tuple(self.frames))
        if self.selected_frames is not None:
            selected = tuple(self.selected_frames)
            limit = len(self.frames) if self.frames is not None else None
            for position in selected:
                if isinstance(position, bool) or not isinstance(position, int) or position < 1:
                    raise InvariantError(f"video {self.video_id}: selected frame {position!r} is not a 1-based index")
                if limit is not None and position > limit:
                    raise InvariantError(f"video {self.video_id}: selected frame {position} exceeds {limit} frames")
            object.__setattr__(self, 'selected_frames', selected)

    @property
    def span(self) -> Optional[Tuple[float, float]]:
        """(first start, last end) of the transcript, None without segments."""
        if not self.segments:
            return None
        return (
            min(segment.interval.start_s for segment in self.segments),
            max(segment.interval.end_s for segment in self.segments),
        )


@dataclass(frozen=True)
class AgentWindow:
    interval: TimeInterval
    score: float
    snippet: str

    def __post_init__(self):
        score = float(self.score)
        if not 0.0 <= score <= 1.0:
            raise InvariantError(f"window score must lie in [0, 1], got {score}")
        if not isinstance(self.snippet, str) or not self.snippet.strip():
            raise InvariantError("window snippet must be non-empty")
        object.__setattr__(self, 'score', score)


@dataclass(frozen=True)
class AgentFinding:
    """Windows one agent found in one video, best first."""

    video_id: str
    windows: Tuple[AgentWindow, ...] = ()

    def __post_init__(self):
        windows = tuple(self.windows)
        for previous, current in zip(windows, windows[1:]):
            if current.score > previous.score:
                raise InvariantError(f"video {self.video_id}: finding windows are not sorted by score")
        object.__setattr__(self, 'windows', windows)


@dataclass(frozen=True)
class AgentFailure:
    video_id: str
    message: str


@dataclass(frozen=True)
class GroundedAnswer:
    """Meta-aggregated answer plus what happened on the way there."""

    steps: Tuple[Step, ...] = ()
    retrieved: Tuple[str, ...] = ()
    failures: Tuple[AgentFailure, ...] = ()
    diagnostics: Tuple[str, ...] = ()

    def __post_init__(self):
        steps = tuple(self.steps)
        for position, step in enumerate(steps, 1):
            if step.index != position:
                raise InvariantError(f"answer step indices must be contiguous from 1, found {step.index} at {position}")
        object.__setattr__(self, 'steps', steps)

    def to_qa_item(self, item_id: str, question: str) -> QAItem:
        return QAItem(id=item_id, question=question, steps=self.steps)


class VideoAgent(abc.ABC):
    """Answers a query from one video's context."""

    @abc.abstractmethod
    def answer(self, query: str, context: VideoContext) -> AgentFinding:
        raise NotImplementedError


class MockTranscriptAgent(VideoAgent):
    """
    Scores every transcript segment by cosine with the query and returns the
    best max_windows segments whose score reaches score_threshold.
    """

    def __init__(self, embedder: TextEmbedder, score_threshold: float = 0.5, max_windows: int = 3):
        if not 0.0 <= score_threshold <= 1.0:
            raise EvaluationError(f"agent score threshold must lie in [0, 1], got {score_threshold}")
        if max_windows < 1:
            raise EvaluationError(f"agent max_windows must be >= 1, got {max_windows}")
        self.embedder = embedder
        self.score_threshold = score_threshold
        self.max_windows = max_windows

    def answer(self, query: str, context: VideoContext) -> AgentFinding:
        query_vector = self.embedder.embed(query)
        scored = []
        for segment in context.segments:
            # negative cosine is no evidence; rounding keeps float noise from reordering ties
            score = round(max(0.0, cosine_similarity(query_vector, self.embedder.embed(segment.text))), 12)
            if score >= self.score_threshold:
                scored.append((score, segment))
        scored.sort(key=lambda pair: (-pair[0], pair[1].interval.start_s, pair[1].interval.end_s))
        windows = tuple(
            AgentWindow(interval=segment.interval, score=score, snippet=segment.text)
            for score, segment in scored[:self.max_windows]
        )
        logger.debug(f"Agent on {context.video_id}: {len(windows)} window(s) of {len(context.segments)} segments")
        return AgentFinding(video_id=context.video_id, windows=windows)


def mock_transcript_agent(embedder: TextEmbedder, score_threshold: float = 0.5, max_windows: int = 3) -> VideoAgent:
    return MockTranscriptAgent(embedder, score_threshold=score_threshold, max_windows=max_windows)


def _window_iou(a, b):
    return interval_set_iou(normalize_interval_set([a]), normalize_interval_set([b]))


def meta_aggregate(query: str, findings: Sequence[AgentFinding], dedupe_iou: float = 0.7) -> GroundedAnswer:
    """
    Merge per-video findings into one grounded answer.

    Windows are ranked by (score desc, video_id, start, end, snippet). A window
    is dropped when any higher-ranked window of the same video, suppressed or
    not, overlaps it with IoU > dedupe_iou. Each surviving window becomes one
    step citing it.
    """
    if not 0.0 <= dedupe_iou <= 1.0:
        raise EvaluationError(f"dedupe_iou must lie in [0, 1], got {dedupe_iou}")
    seen_videos = set()
    candidates = []
    for finding in findings:
        if finding.video_id in seen_videos:
            raise EvaluationError(f"two findings for video {finding.video_id}")
        seen_videos.add(finding.video_id)
        for window in finding.windows:
            candidates.append((finding.video_id, window))

    candidates.sort(key=lambda pair: (
        -pair[1].score,
        pair[0],
        pair[1].interval.start_s,
        pair[1].interval.end_s,
        pair[1].snippet,
    ))

    kept = []
    for rank, (video_id, window) in enumerate(candidates):
        suppressed = any(
            earlier_video == video_id and _window_iou(earlier.interval, window.interval) > dedupe_iou
            for earlier_video, earlier in candidates[:rank]
        )
        if suppressed:
            logger.debug(f"Suppressed window {video_id} [{window.interval.start_s}, {window.interval.end_s}]")
            continue
        kept.append((video_id, window))

    steps = tuple(
        Step(index=position, text=window.snippet, groundings=(Grounding(video_id, window.interval),))
        for position, (video_id, window) in enumerate(kept, 1)
    )
    return GroundedAnswer(steps=steps)


def _invoke_agent(agent, query, context):
    try:
        finding = agent.answer(query, context)
        if finding.video_id != context.video_id:
            raise InvariantError(f"agent answered for {finding.video_id} instead of {context.video_id}")
        span = context.span
        for window in finding.windows:
            if span is None or window.interval.start_s < span[0] or window.interval.end_s > span[1]:
                raise InvariantError(
                    f"window [{window.interval.start_s}, {window.interval.end_s}] lies outside the transcript"
                )
        return finding, None
    except Exception as e:
        logger.warning(f"Agent failed on video {context.video_id}: {e}")
        return None, AgentFailure(video_id=context.video_id, message=str(e))


def run_pipeline(
    query: str,
    index: RetrievalIndex,
    contexts: Mapping[str, VideoContext],
    query_embedding: EmbeddingVector,
    k: int,
    agent: VideoAgent,
    dedupe_iou: float = 0.7,
    workers: int = 1,
) -> GroundedAnswer:
    """
    Retrieve the top-k videos, run one agent per video, aggregate.

    Agent failures are recorded on the answer and do not stop the run.
    The answer does not depend on the order agents finish in.
    """
    missing = [video_id for video_id in index.video_ids if video_id not in contexts]
    if missing:
        raise EvaluationError(f"no context for indexed video(s): {', '.join(missing)}")
    if workers < 1:
        raise EvaluationError(f"workers must be >= 1, got {workers}")

    table = score_videos(query_embedding, index)
    retrieved = top_k(table, k)
    logger.info(f"Retrieved {len(retrieved)} video(s): {', '.join(retrieved)}")

    if workers == 1:
        outcomes = [_invoke_agent(agent, query, contexts[video_id]) for video_id in retrieved]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_invoke_agent, agent, query, contexts[video_id]) for video_id in retrieved]
            outcomes = [future.result() for future in futures]

    findings = [finding for finding, _ in outcomes if finding is not None]
    failures = tuple(failure for _, failure in outcomes if failure is not None)

    aggregated = meta_aggregate(query, findings, dedupe_iou)
    diagnostics = []
    if not aggregated.steps:
        diagnostics.append("no agent returned a window for this query")
    if failures:
        diagnostics.append(f"{len(failures)} agent(s) failed")
    logger.info(f"Pipeline produced {len(aggregated.steps)} step(s), {len(failures)} failure(s)")
    return GroundedAnswer(
        steps=aggregated.steps,
        retrieved=tuple(retrieved),
        failures=failures,
        diagnostics=tuple(diagnostics),
    )

"""
Loading, validation and writing of every file format the toolkit reads.

Formats (UTF-8; schema_version "1" is written into every file and, when
present, must equal "1" on read):

    dataset / prediction  JSONL {"id", "question", "answer_steps": [{"index", "text",
                          "groundings": [{"video_id", "start_s", "end_s"}]}], "answer"?}
    retrieval index       JSON  {"dim", "videos": [{"video_id", "av", "caption"}]}
                          ("audio" + "visual" may replace "av"; they are Hadamard-fused)
    frame embeddings      JSON  {"dim", "frames": [[...], ...]} or {"dim", "audio", "visual"}
    transcript            JSON  {"video_id", "segments": [{"start_s", "end_s", "text"}]}
    qrels                 JSONL {"id", "relevant": [video_id, ...]}
    rankings              JSONL {"id", "ranking": [video_id, ...]}
    query embedding       JSON  {"dim", "embedding": [...]}
    text embeddings       JSON  {"dim", "texts": {text: [...]}}

Every loader returns fully validated domain objects. Failures raise
DataIOError (cannot read), FormatSyntaxError (not JSON), SchemaVersionError
or RecordValidationError (file, record id and field path in the message).
"""
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .agents import TranscriptSegment, VideoContext
from .config import SCHEMA_VERSION
from .core import Grounding, QAItem, Step, TimeInterval
from .embedding import EmbeddingVector, PrecomputedTextEmbedder
from .exceptions import (
    DataIOError,
    DimensionError,
    FormatSyntaxError,
    InvariantError,
    RecordValidationError,
    ReferenceFormatError,
    SchemaVersionError,
)
from .retrieval import RetrievalIndex, VideoEntry, hadamard_fuse
from .sfs import fuse_frame_streams

logger = logging.getLogger(__name__)

_REFERENCE_ENTRY = re.compile(r"^(\S+?)\.txt\s+(\d+(?:\.\d+)?)\s*s\s*>\s*(\d+(?:\.\d+)?)\s*s$")
_CLOCK_TIME = re.compile(r"^(?:(\d+):)?(\d{1,2}):(\d{1,2}(?:\.\d+)?)$")


# ---------------------------------------------------------------------------
# Reference strings ("1.txt 0017s > 0074s, 2.txt 0050s > 0100s")
# ---------------------------------------------------------------------------

def parse_reference_string(text: str) -> List[Grounding]:
    """
    Parse comma-separated "<id>.txt NNNNs > MMMMs" entries into groundings.

    Zero-padded and decimal seconds are accepted; blank entries are skipped.
    """
    groundings = []
    if not text or not text.strip():
        return groundings
    for position, raw in enumerate(text.split(','), 1):
        token = raw.strip()
        if not token:
            continue
        match = _REFERENCE_ENTRY.match(token)
        if not match:
            raise ReferenceFormatError(token, position, "expected '<id>.txt NNNNs > MMMMs'")
        video_id, start, end = match.groups()
        try:
            interval = TimeInterval(float(start), float(end))
        except InvariantError as e:
            raise ReferenceFormatError(token, position, str(e)) from e
        groundings.append(Grounding(video_id=video_id, interval=interval))
    return groundings


def _format_seconds(value):
    if float(value).is_integer():
        return f"{int(value):04d}"
    return repr(float(value))


def format_reference_string(groundings: Sequence[Grounding]) -> str:
    """Inverse of parse_reference_string."""
    return ", ".join(
        f"{g.video_id}.txt {_format_seconds(g.interval.start_s)}s > {_format_seconds(g.interval.end_s)}s"
        for g in groundings
    )


def parse_time(value: Any) -> float:
    """Seconds from a number, a numeric string, or HH:MM:SS / MM:SS."""
    if isinstance(value, bool):
        raise ValueError(f"expected seconds, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        match = _CLOCK_TIME.match(text)
        if match:
            hours, minutes, seconds = match.groups()
            return int(hours or 0) * 3600 + int(minutes) * 60 + float(seconds)
        try:
            return float(text)
        except ValueError:
            pass
    raise ValueError(f"expected seconds or HH:MM:SS, got {value!r}")


# ---------------------------------------------------------------------------
# Raw file access
# ---------------------------------------------------------------------------

def _read_text(path):
    try:
        return Path(path).read_text(encoding='utf-8')
    except FileNotFoundError:
        raise DataIOError(f"{path}: file not found")
    except (OSError, UnicodeDecodeError) as e:
        raise DataIOError(f"{path}: cannot read ({e})") from e


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding='utf-8')
    except OSError as e:
        raise DataIOError(f"{path}: cannot write ({e})") from e


def _read_json(path):
    text = _read_text(path)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatSyntaxError(str(path), e.msg, line=e.lineno) from e
    if not isinstance(obj, dict):
        raise FormatSyntaxError(str(path), "top-level value must be a JSON object")
    _check_schema(path, obj)
    return obj


def _read_jsonl(path):
    text = _read_text(path)
    for line_number, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatSyntaxError(str(path), e.msg, line=line_number) from e
        if not isinstance(obj, dict):
            raise FormatSyntaxError(str(path), "each line must be a JSON object", line=line_number)
        _check_schema(path, obj, obj.get('id') if isinstance(obj.get('id'), str) else None)
        yield line_number, obj


def _check_schema(path, obj, record_id=None):
    if 'schema_version' in obj and obj['schema_version'] != SCHEMA_VERSION:
        raise SchemaVersionError(str(path), obj['schema_version'], record_id)


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def _require(obj, key, kind, path, record_id, field_path):
    if key not in obj:
        raise RecordValidationError(str(path), record_id, field_path, "missing")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        expected = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise RecordValidationError(str(path), record_id, field_path, f"expected {expected}, got {type(value).__name__}")
    return value


def _vector(values, path, record_id, field_path, dim=None):
    if not isinstance(values, list):
        raise RecordValidationError(str(path), record_id, field_path, "expected a list of numbers")
    try:
        vector = EmbeddingVector(tuple(values))
    except InvariantError as e:
        raise RecordValidationError(str(path), record_id, field_path, str(e)) from e
    if dim is not None and vector.dim != dim:
        raise DimensionError(
            f"{path}: record {record_id}, field {field_path}: dimension {vector.dim} does not match dim {dim}"
        )
    return vector


def _dimension(obj, path):
    dim = _require(obj, 'dim', int, path, None, 'dim')
    if dim < 1:
        raise RecordValidationError(str(path), None, 'dim', f"must be >= 1, got {dim}")
    return dim


def _interval(obj, path, record_id, field_path):
    for key in ('start_s', 'end_s'):
        if key not in obj:
            raise RecordValidationError(str(path), record_id, f"{field_path}.{key}", "missing")
    try:
        start = parse_time(obj['start_s'])
    except ValueError as e:
        raise RecordValidationError(str(path), record_id, f"{field_path}.start_s", str(e)) from e
    try:
        end = parse_time(obj['end_s'])
    except ValueError as e:
        raise RecordValidationError(str(path), record_id, f"{field_path}.end_s", str(e)) from e
    try:
        return TimeInterval(start, end)
    except InvariantError as e:
        raise RecordValidationError(str(path), record_id, field_path, str(e)) from e


# ---------------------------------------------------------------------------
# Datasets and predictions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetFile:
    """QA records of one dataset or prediction file, ids unique."""

    records: Tuple[QAItem, ...]
    path: str = ''

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for record in records:
            if record.id in seen:
                raise InvariantError(f"duplicate record id {record.id}")
            seen.add(record.id)
        object.__setattr__(self, 'records', records)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def by_id(self) -> Dict[str, QAItem]:
        return {record.id: record for record in self.records}


def parse_qa_record(obj: Mapping[str, Any], path='<memory>', line: Optional[int] = None) -> QAItem:
    """Validate one dataset line into a QAItem."""
    record_id = obj.get('id') if isinstance(obj.get('id'), str) else (f"line {line}" if line else None)
    item_id = _require(obj, 'id', str, path, record_id, 'id')
    if not item_id.strip():
        raise RecordValidationError(str(path), record_id, 'id', "must be non-empty")
    question = _require(obj, 'question', str, path, record_id, 'question')
    raw_steps = _require(obj, 'answer_steps', list, path, record_id, 'answer_steps')

    steps = []
    for position, raw_step in enumerate(raw_steps, 1):
        step_path = f"answer_steps[{position - 1}]"
        if not isinstance(raw_step, dict):
            raise RecordValidationError(str(path), record_id, step_path, "expected an object")
        index = _require(raw_step, 'index', int, path, record_id, f"{step_path}.index")
        if index != position:
            raise RecordValidationError(
                str(path), record_id, f"{step_path}.index",
                f"step indices must be contiguous from 1, expected {position}, got {index}",
            )
        text = _require(raw_step, 'text', str, path, record_id, f"{step_path}.text")

        groundings = []
        raw_groundings = raw_step.get('groundings', [])
        if not isinstance(raw_groundings, list):
            raise RecordValidationError(str(path), record_id, f"{step_path}.groundings", "expected a list")
        for g_position, raw_grounding in enumerate(raw_groundings):
            g_path = f"{step_path}.groundings[{g_position}]"
            if not isinstance(raw_grounding, dict):
                raise RecordValidationError(str(path), record_id, g_path, "expected an object")
            video_id = _require(raw_grounding, 'video_id', str, path, record_id, f"{g_path}.video_id")
            interval = _interval(raw_grounding, path, record_id, g_path)
            try:
                groundings.append(Grounding(video_id=video_id, interval=interval))
            except InvariantError as e:
                raise RecordValidationError(str(path), record_id, f"{g_path}.video_id", str(e)) from e

        # the listing form "1.txt 0017s > 0074s, ..." is accepted next to explicit groundings
        if 'reference' in raw_step:
            reference = _require(raw_step, 'reference', str, path, record_id, f"{step_path}.reference")
            try:
                groundings.extend(parse_reference_string(reference))
            except ReferenceFormatError as e:
                raise RecordValidationError(str(path), record_id, f"{step_path}.reference", str(e)) from e

        try:
            steps.append(Step(index=index, text=text, groundings=tuple(groundings)))
        except InvariantError as e:
            raise RecordValidationError(str(path), record_id, f"{step_path}.text", str(e)) from e

    answer = obj.get('answer')
    if answer is not None and not isinstance(answer, str):
        raise RecordValidationError(str(path), record_id, 'answer', "expected a string")
    return QAItem(id=item_id.strip(), question=question, steps=tuple(steps), answer=answer)


def qa_record_to_dict(item: QAItem) -> Dict[str, Any]:
    obj = {
        'schema_version': SCHEMA_VERSION,
        'id': item.id,
        'question': item.question,
        'answer_steps': [
            {
                'index': step.index,
                'text': step.text,
                'groundings': [
                    {'video_id': g.video_id, 'start_s': g.interval.start_s, 'end_s': g.interval.end_s}
                    for g in step.groundings
                ],
            }
            for step in item.steps
        ],
    }
    if item.answer is not None:
        obj['answer'] = item.answer
    return obj


def load_dataset(path) -> DatasetFile:
    """Load a dataset or prediction JSONL file."""
    records = []
    seen = set()
    for line_number, obj in _read_jsonl(path):
        item = parse_qa_record(obj, path, line_number)
        if item.id in seen:
            raise RecordValidationError(str(path), item.id, 'id', "duplicate id")
        seen.add(item.id)
        records.append(item)
    logger.info(f"Loaded {len(records)} record(s) from {path}")
    return DatasetFile(records=tuple(records), path=str(path))


def write_dataset(items: Sequence[QAItem], path):
    _write_text(path, "".join(_dumps(qa_record_to_dict(item)) + "\n" for item in items))


# ---------------------------------------------------------------------------
# Retrieval index, frames, query and text embeddings
# ---------------------------------------------------------------------------

def load_index(path) -> RetrievalIndex:
    obj = _read_json(path)
    dim = _dimension(obj, path)
    videos = _require(obj, 'videos', list, path, None, 'videos')
    entries = []
    for position, video in enumerate(videos):
        field_path = f"videos[{position}]"
        if not isinstance(video, dict):
            raise RecordValidationError(str(path), None, field_path, "expected an object")
        video_id = _require(video, 'video_id', str, path, None, f"{field_path}.video_id")
        if 'av' in video:
            av = _vector(video['av'], path, video_id, f"{field_path}.av", dim)
        elif 'audio' in video and 'visual' in video:
            av = hadamard_fuse(
                _vector(video['audio'], path, video_id, f"{field_path}.audio", dim),
                _vector(video['visual'], path, video_id, f"{field_path}.visual", dim),
            )
        else:
            raise RecordValidationError(str(path), video_id, f"{field_path}.av", "missing (or give audio and visual)")
        if 'caption' not in video:
            raise RecordValidationError(str(path), video_id, f"{field_path}.caption", "missing")
        caption = _vector(video['caption'], path, video_id, f"{field_path}.caption", dim)
        try:
            entries.append(VideoEntry(video_id=video_id, av_embedding=av, caption_embedding=caption))
        except DimensionError:
            raise
        except InvariantError as e:
            raise RecordValidationError(str(path), video_id, f"{field_path}.video_id", str(e)) from e
    try:
        index = RetrievalIndex(dimension=dim, entries=tuple(entries))
    except DimensionError as e:
        raise DimensionError(f"{path}: {e}") from e
    except InvariantError as e:
        raise RecordValidationError(str(path), None, 'videos', str(e)) from e
    logger.info(f"Loaded index of {len(index)} video(s), dim {dim}, from {path}")
    return index


def write_index(index: RetrievalIndex, path):
    obj = {
        'schema_version': SCHEMA_VERSION,
        'dim': index.dimension,
        'videos': [
            {
                'video_id': entry.video_id,
                'av': list(entry.av_embedding.values),
                'caption': list(entry.caption_embedding.values),
            }
            for entry in index.entries
        ],
    }
    _write_text(path, _dumps(obj) + "\n")


def _frame_list(obj, key, path, dim):
    raw = _require(obj, key, list, path, None, key)
    return [_vector(values, path, None, f"{key}[{position}]", dim) for position, values in enumerate(raw)]


def load_frame_embeddings(path) -> List[EmbeddingVector]:
    """Per-frame embeddings; frame t sits at list position t - 1."""
    obj = _read_json(path)
    dim = _dimension(obj, path)
    if 'frames' in obj:
        frames = _frame_list(obj, 'frames', path, dim)
    elif 'audio' in obj and 'visual' in obj:
        audio = _frame_list(obj, 'audio', path, dim)
        visual = _frame_list(obj, 'visual', path, dim)
        if len(audio) != len(visual):
            raise RecordValidationError(
                str(path), None, 'visual', f"{len(visual)} visual frames for {len(audio)} audio frames"
            )
        frames = fuse_frame_streams(audio, visual)
    else:
        raise RecordValidationError(str(path), None, 'frames', "missing (or give audio and visual)")
    logger.info(f"Loaded {len(frames)} frame embedding(s) from {path}")
    return frames


def write_frame_embeddings(frames: Sequence[EmbeddingVector], path):
    if not frames:
        raise InvariantError("cannot write an empty frame embedding file")
    obj = {
        'schema_version': SCHEMA_VERSION,
        'dim': frames[0].dim,
        'frames': [list(frame.values) for frame in frames],
    }
    _write_text(path, _dumps(obj) + "\n")


def load_query_embedding(path) -> EmbeddingVector:
    obj = _read_json(path)
    dim = _dimension(obj, path)
    if 'embedding' not in obj:
        raise RecordValidationError(str(path), None, 'embedding', "missing")
    return _vector(obj['embedding'], path, None, 'embedding', dim)


def write_query_embedding(vector: EmbeddingVector, path):
    obj = {'schema_version': SCHEMA_VERSION, 'dim': vector.dim, 'embedding': list(vector.values)}
    _write_text(path, _dumps(obj) + "\n")


def load_text_embeddings(path) -> PrecomputedTextEmbedder:
    obj = _read_json(path)
    dim = _dimension(obj, path)
    texts = _require(obj, 'texts', dict, path, None, 'texts')
    table = {text: _vector(values, path, None, f"texts[{text!r}]", dim) for text, values in texts.items()}
    logger.info(f"Loaded {len(table)} precomputed text embedding(s) from {path}")
    return PrecomputedTextEmbedder(table)


# ---------------------------------------------------------------------------
# Transcripts / video contexts
# ---------------------------------------------------------------------------

def load_transcript(path) -> VideoContext:
    obj = _read_json(path)
    video_id = _require(obj, 'video_id', str, path, None, 'video_id')
    raw_segments = _require(obj, 'segments', list, path, video_id, 'segments')
    segments = []
    for position, raw in enumerate(raw_segments):
        field_path = f"segments[{position}]"
        if not isinstance(raw, dict):
            raise RecordValidationError(str(path), video_id, field_path, "expected an object")
        interval = _interval(raw, path, video_id, field_path)
        text = _require(raw, 'text', str, path, video_id, f"{field_path}.text")
        try:
            segments.append(TranscriptSegment(interval=interval, text=text))
        except InvariantError as e:
            raise RecordValidationError(str(path), video_id, f"{field_path}.text", str(e)) from e
    try:
        return VideoContext(video_id=video_id, segments=tuple(segments))
    except InvariantError as e:
        raise RecordValidationError(str(path), video_id, 'video_id', str(e)) from e


def write_transcript(context: VideoContext, path):
    obj = {
        'schema_version': SCHEMA_VERSION,
        'video_id': context.video_id,
        'segments': [
            {'start_s': s.interval.start_s, 'end_s': s.interval.end_s, 'text': s.text}
            for s in context.segments
        ],
    }
    _write_text(path, _dumps(obj) + "\n")


def load_contexts(directory) -> Dict[str, VideoContext]:
    """Every *.json transcript in a directory, keyed by video_id."""
    root = Path(directory)
    if not root.is_dir():
        raise DataIOError(f"{directory}: not a directory")
    contexts: Dict[str, VideoContext] = {}
    for path in sorted(root.glob('*.json')):
        context = load_transcript(path)
        if context.video_id in contexts:
            raise RecordValidationError(str(path), context.video_id, 'video_id', "second transcript for this video")
        contexts[context.video_id] = context
    logger.info(f"Loaded {len(contexts)} video context(s) from {directory}")
    return contexts


# ---------------------------------------------------------------------------
# Qrels and rankings
# ---------------------------------------------------------------------------

def _id_lists(path, key, allow_duplicates):
    result: Dict[str, Tuple[str, ...]] = {}
    for line_number, obj in _read_jsonl(path):
        record_id = obj.get('id') if isinstance(obj.get('id'), str) else f"line {line_number}"
        query_id = _require(obj, 'id', str, path, record_id, 'id').strip()
        values = _require(obj, key, list, path, query_id, key)
        ids = []
        for position, value in enumerate(values):
            if not isinstance(value, str) or not value.strip():
                raise RecordValidationError(str(path), query_id, f"{key}[{position}]", "expected a non-empty video id")
            ids.append(value.strip())
        if not allow_duplicates and len(set(ids)) != len(ids):
            raise RecordValidationError(str(path), query_id, key, "video ids repeat")
        if query_id in result:
            raise RecordValidationError(str(path), query_id, 'id', "duplicate id")
        result[query_id] = tuple(ids)
    return result


def load_qrels(path) -> Dict[str, Tuple[str, ...]]:
    """Relevant video ids per query; an empty list loads and is flagged at evaluation."""
    qrels = _id_lists(path, 'relevant', allow_duplicates=True)
    logger.info(f"Loaded qrels for {len(qrels)} query(ies) from {path}")
    return qrels


def load_rankings(path) -> Dict[str, Tuple[str, ...]]:
    rankings = _id_lists(path, 'ranking', allow_duplicates=False)
    logger.info(f"Loaded rankings for {len(rankings)} query(ies) from {path}")
    return rankings


def write_qrels(qrels: Mapping[str, Sequence[str]], path):
    _write_text(path, "".join(
        _dumps({'schema_version': SCHEMA_VERSION, 'id': query_id, 'relevant': list(relevant)}) + "\n"
        for query_id, relevant in qrels.items()
    ))


def ranking_line(query_id: str, ranking: Sequence[str]) -> str:
    return _dumps({'schema_version': SCHEMA_VERSION, 'id': query_id, 'ranking': list(ranking)}) + "\n"


def append_ranking(path, query_id: str, ranking: Sequence[str]):
    try:
        with open(path, 'a', encoding='utf-8') as handle:
            handle.write(ranking_line(query_id, ranking))
    except OSError as e:
        raise DataIOError(f"{path}: cannot write ({e})") from e


def write_rankings(rankings: Mapping[str, Sequence[str]], path):
    _write_text(path, "".join(ranking_line(query_id, ranking) for query_id, ranking in rankings.items()))


# ---------------------------------------------------------------------------
# Schema check entry point
# ---------------------------------------------------------------------------

FORMAT_LOADERS = {
    'dataset': load_dataset,
    'index': load_index,
    'frames': load_frame_embeddings,
    'transcript': load_transcript,
    'qrels': load_qrels,
    'rankings': load_rankings,
    'query': load_query_embedding,
    'text-embeddings': load_text_embeddings,
}


def validate_file(kind: str, path) -> int:
    """Load a file of the given kind and return how many records it holds."""
    if kind not in FORMAT_LOADERS:
        raise ValueError(f"unknown format {kind!r}; choose from {', '.join(FORMAT_LOADERS)}")
    loaded = FORMAT_LOADERS[kind](path)
    if isinstance(loaded, EmbeddingVector):
        return 1
    if isinstance(loaded, VideoContext):
        return len(loaded.segments)
    return len(loaded)

from pathlib import Path

from avrag.core import Grounding, Step, TimeInterval
from avrag.embedding import EmbeddingVector

DATA_DIR = Path(__file__).resolve().parent / 'data'


def data_path(name: str) -> str:
    return str(DATA_DIR / name)


class VocabularyEmbedder:
    """One basis vector per known text; unknown text maps to the zero vector."""

    def __init__(self, texts):
        self.vocabulary = {}
        for text in texts:
            self.vocabulary.setdefault(text, len(self.vocabulary))
        self.dimension = max(1, len(self.vocabulary))

    def embed(self, text):
        values = [0.0] * self.dimension
        if text in self.vocabulary:
            values[self.vocabulary[text]] = 1.0
        return EmbeddingVector(tuple(values))


def interval(start, end):
    return TimeInterval(start, end)


def step(index, text, *groundings):
    """step(1, "text", ("v1", 0, 10), ...)"""
    return Step(
        index=index,
        text=text,
        groundings=tuple(Grounding(video_id, TimeInterval(start, end)) for video_id, start, end in groundings),
    )

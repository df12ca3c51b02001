import numpy as np
from django.test import SimpleTestCase

from avrag.embedding import (
    HASHED_BOW_VERSION,
    EmbeddingVector,
    HashedBagOfWordsEmbedder,
    PrecomputedTextEmbedder,
    cosine_similarity,
    default_embedder,
    embed_texts,
    tokenize,
)
from avrag.exceptions import DimensionError, EmbeddingError, EvaluationError, InvariantError
from avrag.retrieval import (
    RetrievalIndex,
    VideoEntry,
    hadamard_fuse,
    mean_recall,
    recall_at_k,
    score_videos,
    top_k,
)


def vec(*values):
    return EmbeddingVector(tuple(values))


def basis_index(count):
    entries = []
    for position in range(count):
        values = [0.0] * count
        values[position] = 1.0
        entries.append(VideoEntry(f"v{position + 1}", vec(*values), vec(*values)))
    return RetrievalIndex(dimension=count, entries=tuple(entries))


class EmbeddingTests(SimpleTestCase):

    def test_vector_rejects_empty_and_non_finite(self):
        with self.assertRaises(InvariantError):
            EmbeddingVector(())
        with self.assertRaises(InvariantError):
            vec(1.0, float('nan'))

    def test_cosine_zero_norm_is_zero(self):
        self.assertEqual(cosine_similarity(vec(0, 0), vec(1, 0)), 0.0)
        self.assertAlmostEqual(cosine_similarity(vec(1, 0), vec(1, 1)), 1 / np.sqrt(2))

    def test_cosine_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            cosine_similarity(vec(1, 0), vec(1, 0, 0))

    def test_tokenize(self):
        self.assertEqual(tokenize("Whisk the EGGS, then-fold!"), ['whisk', 'the', 'eggs', 'then', 'fold'])

    def test_hashed_embedder_is_deterministic_and_normalized(self):
        embedder = default_embedder()
        self.assertEqual(embedder.version, HASHED_BOW_VERSION)
        first = embedder.embed("Crack the eggs")
        self.assertEqual(first, HashedBagOfWordsEmbedder().embed("crack   THE eggs"))
        self.assertEqual(first.dim, 256)
        self.assertAlmostEqual(float(np.linalg.norm(first.as_array())), 1.0)

    def test_hashed_embedder_counts_repeated_tokens(self):
        embedder = default_embedder()
        self.assertEqual(embedder.bucket('a'), 47)
        self.assertEqual(embedder.bucket('b'), 117)
        values = embedder.embed("a a b").values
        self.assertAlmostEqual(values[47], 2 / np.sqrt(5))
        self.assertAlmostEqual(values[117], 1 / np.sqrt(5))
        self.assertEqual(sum(1 for value in values if value), 2)

    def test_hashed_embedder_ignores_word_order(self):
        embedder = default_embedder()
        similarity = cosine_similarity(embedder.embed("eggs whisk"), embedder.embed("whisk eggs"))
        self.assertAlmostEqual(similarity, 1.0)

    def test_hashed_embedder_empty_text_is_zero_vector(self):
        self.assertFalse(default_embedder().embed("  ,, ").as_array().any())

    def test_precomputed_embedder_names_missing_text(self):
        embedder = PrecomputedTextEmbedder({'a': vec(1, 0)})
        self.assertEqual(embedder.dimension, 2)
        with self.assertRaises(EmbeddingError) as caught:
            embedder.embed('b')
        self.assertIn("'b'", str(caught.exception))

    def test_embed_texts_stacks_rows(self):
        matrix = embed_texts(['a', 'b'], PrecomputedTextEmbedder({'a': vec(1, 0), 'b': vec(0, 1)}))
        self.assertEqual(matrix.shape, (2, 2))


class FusionAndIndexTests(SimpleTestCase):

    def test_hadamard_fuse(self):
        self.assertEqual(hadamard_fuse(vec(1, 2, 3), vec(2, 0, -1)), vec(2, 0, -3))

    def test_hadamard_fuse_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            hadamard_fuse(vec(1, 2), vec(1, 2, 3))

    def test_index_rejects_duplicates_and_mixed_dimensions(self):
        entry = VideoEntry('v1', vec(1, 0), vec(0, 1))
        with self.assertRaises(InvariantError):
            RetrievalIndex(dimension=2, entries=(entry, entry))
        with self.assertRaises(DimensionError):
            RetrievalIndex(dimension=3, entries=(entry,))

    def test_entry_rejects_mismatched_caption(self):
        with self.assertRaises(DimensionError):
            VideoEntry('v1', vec(1, 0), vec(1, 0, 0))


class ScoringTests(SimpleTestCase):

    def test_scores_and_ranking(self):
        table = score_videos(vec(4, 3, 2, 1), basis_index(4))
        self.assertEqual(table.ranking, ('v1', 'v2', 'v3', 'v4'))
        norm = np.sqrt(30)
        self.assertAlmostEqual(table.scores['v1'].s_av, 4 / norm)
        self.assertAlmostEqual(table.scores['v1'].sim_avg, 4 / norm)

    def test_sim_avg_is_mean_of_both_scores(self):
        index = RetrievalIndex(dimension=2, entries=(VideoEntry('v1', vec(1, 0), vec(0, 1)),))
        score = score_videos(vec(1, 0), index).scores['v1']
        self.assertEqual((score.s_av, score.s_cap, score.sim_avg), (1.0, 0.0, 0.5))

    def test_ties_break_by_video_id(self):
        entries = (
            VideoEntry('b', vec(1, 0), vec(1, 0)),
            VideoEntry('a', vec(1, 0), vec(1, 0)),
            VideoEntry('c', vec(0, 1), vec(0, 1)),
        )
        table = score_videos(vec(1, 0), RetrievalIndex(dimension=2, entries=entries))
        self.assertEqual(table.ranking, ('a', 'b', 'c'))

    def test_scoring_is_independent_of_index_order(self):
        rng = np.random.default_rng(5)
        entries = [VideoEntry(f"v{i}", EmbeddingVector.from_array(rng.normal(size=8)),
                              EmbeddingVector.from_array(rng.normal(size=8))) for i in range(12)]
        query = EmbeddingVector.from_array(rng.normal(size=8))
        forward = score_videos(query, RetrievalIndex(8, tuple(entries)))
        backward = score_videos(query, RetrievalIndex(8, tuple(reversed(entries))))
        self.assertEqual(forward.ranking, backward.ranking)

    def test_query_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            score_videos(vec(1, 0), basis_index(3))

    def test_top_k_bounds(self):
        table = score_videos(vec(3, 2, 1), basis_index(3))
        self.assertEqual(top_k(table, 2), ['v1', 'v2'])
        self.assertEqual(top_k(table, 3), ['v1', 'v2', 'v3'])
        for k in (0, 4):
            with self.assertRaises(EvaluationError):
                top_k(table, k)


class RecallTests(SimpleTestCase):

    def test_capped_recall(self):
        ranking = ['v1', 'v3', 'v2', 'v4', 'v5', 'v6']
        recall = recall_at_k(ranking, ['v1', 'v2'], [1, 3, 5])
        self.assertEqual(recall, {1: 1.0, 3: 1.0, 5: 1.0})

    def test_relevant_denominator(self):
        recall = recall_at_k(['v1', 'v3'], ['v1', 'v2'], [1], denominator='relevant')
        self.assertEqual(recall, {1: 0.5})

    def test_empty_relevant_set_is_an_error(self):
        with self.assertRaises(EvaluationError):
            recall_at_k(['v1'], [], [1])

    def test_recall_is_monotone_in_k(self):
        rng = np.random.default_rng(9)
        videos = [f"v{i}" for i in range(10)]
        for _ in range(50):
            ranking = list(rng.permutation(videos))
            relevant = list(rng.choice(videos, size=int(rng.integers(1, 5)), replace=False))
            recall = recall_at_k(ranking, relevant, range(1, 11), denominator='relevant')
            values = [recall[k] for k in range(1, 11)]
            self.assertEqual(values, sorted(values))
            self.assertEqual(values[-1], 1.0)

    def test_mean_recall(self):
        per_query = [{1: 1.0, 3: 1.0}, {1: 0.0, 3: 1 / 3}]
        means = mean_recall(per_query, [1, 3])
        self.assertEqual(means[1], 0.5)
        self.assertAlmostEqual(means[3], 2 / 3)


class PlantedNeighborTests(SimpleTestCase):
    """50 random videos; each of 20 queries has its own planted near-copies."""

    dimension = 32

    def setUp(self):
        rng = np.random.default_rng(21)
        self.queries = {}
        self.relevant = {}
        entries = []
        position = 0
        for query_number in range(20):
            query = rng.normal(size=self.dimension)
            query_id = f"q{query_number}"
            self.queries[query_id] = query
            self.relevant[query_id] = []
            for _ in range(int(rng.integers(1, 3))):
                video_id = f"v{position:02d}"
                position += 1
                av = query + 0.01 * rng.normal(size=self.dimension)
                caption = query + 0.01 * rng.normal(size=self.dimension)
                entries.append(VideoEntry(video_id, EmbeddingVector.from_array(av), EmbeddingVector.from_array(caption)))
                self.relevant[query_id].append(video_id)
        while position < 50:
            entries.append(VideoEntry(
                f"v{position:02d}",
                EmbeddingVector.from_array(rng.normal(size=self.dimension)),
                EmbeddingVector.from_array(rng.normal(size=self.dimension)),
            ))
            position += 1
        self.index = RetrievalIndex(dimension=self.dimension, entries=tuple(entries))

    def test_planted_neighbors_are_recalled(self):
        self.assertEqual(len(self.index), 50)
        ks = [2, 3, 5]
        per_query = []
        for query_id, query in self.queries.items():
            ranking = score_videos(EmbeddingVector.from_array(query), self.index).ranking
            per_query.append(recall_at_k(ranking, self.relevant[query_id], ks))
        self.assertEqual(mean_recall(per_query, ks), {2: 1.0, 3: 1.0, 5: 1.0})

    def test_ranking_ignores_positive_query_scale(self):
        for query in self.queries.values():
            ranking = score_videos(EmbeddingVector.from_array(query), self.index).ranking
            for scale in (0.5, 3.0, 1000.0):
                scaled = score_videos(EmbeddingVector.from_array(query * scale), self.index).ranking
                self.assertEqual(scaled, ranking)

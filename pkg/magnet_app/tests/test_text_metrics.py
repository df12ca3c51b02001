import math

from django.test import SimpleTestCase

from avrag.exceptions import EvaluationError
from evaluation.text_metrics import (
    AlignmentReport,
    bleu4,
    cider,
    cider_scores,
    evaluate_alignment,
    ngram_counts,
    text_sim,
)

from .helpers import VocabularyEmbedder


class NgramTests(SimpleTestCase):

    def test_counts(self):
        counts = ngram_counts(['a', 'b', 'a', 'b'], 2)
        self.assertEqual(counts[('a', 'b')], 2)
        self.assertEqual(counts[('b', 'a')], 1)
        self.assertEqual(ngram_counts(['a'], 2), {})


class BleuTests(SimpleTestCase):

    def test_identical_is_one(self):
        self.assertAlmostEqual(bleu4(['the cat sat on the mat'], ['the cat sat on the mat']), 1.0)

    def test_brevity_penalty(self):
        self.assertAlmostEqual(bleu4(['a b c d'], ['a b c d e']), math.exp(-0.25))

    def test_longer_candidate_has_no_penalty(self):
        self.assertAlmostEqual(bleu4(['a b c d e'], ['a b c d e']), 1.0)

    def test_no_overlap_is_zero(self):
        self.assertEqual(bleu4(['x y z w'], ['a b c d']), 0.0)

    def test_missing_higher_order_gives_zero(self):
        self.assertEqual(bleu4(['a b'], ['a b c']), 0.0)

    def test_orders_absent_on_both_sides_are_skipped(self):
        self.assertAlmostEqual(bleu4(['a b'], ['a b']), 1.0)

    def test_is_case_and_punctuation_insensitive(self):
        self.assertAlmostEqual(bleu4(['The Cat, sat on the mat.'], ['the cat sat on the mat']), 1.0)

    def test_length_mismatch(self):
        with self.assertRaises(EvaluationError):
            bleu4(['a'], ['a', 'b'])
        with self.assertRaises(EvaluationError):
            bleu4([], [])


class CiderTests(SimpleTestCase):

    def test_per_pair_scores(self):
        scores = cider_scores(['a b', 'a d'], ['a b', 'a c'])
        self.assertAlmostEqual(scores[0], 5.0)
        self.assertAlmostEqual(scores[1], 0.0)
        self.assertAlmostEqual(cider(['a b', 'a d'], ['a b', 'a c']), 2.5)

    def test_length_penalty_only_in_cider_d(self):
        base = (2 / math.sqrt(6) + 1 / math.sqrt(2)) / 4 * 10
        cider_d = cider_scores(['a b e', 'c d'], ['a b', 'c d'], 'cider-d')
        plain = cider_scores(['a b e', 'c d'], ['a b', 'c d'], 'cider')
        self.assertAlmostEqual(cider_d[0], base * math.exp(-1 / 72))
        self.assertAlmostEqual(plain[0], base)
        self.assertAlmostEqual(cider_d[1], 5.0)
        self.assertAlmostEqual(plain[1], 5.0)

    def test_short_texts_average_over_all_orders(self):
        texts = ['a b', 'c d']
        self.assertEqual([round(score, 9) for score in cider_scores(texts, texts)], [5.0, 5.0])
        self.assertEqual(bleu4(texts, texts), 1.0)

    def test_identical_corpus_scores_ten(self):
        texts = ['the cat sat on the mat', 'dogs run fast in parks']
        self.assertAlmostEqual(cider(texts, texts), 10.0)

    def test_needs_two_pairs(self):
        with self.assertRaises(EvaluationError):
            cider(['a b'], ['a b'])

    def test_unknown_variant(self):
        with self.assertRaises(EvaluationError):
            cider(['a', 'b'], ['a', 'b'], 'meteor')


class AlignmentTests(SimpleTestCase):

    def test_text_sim(self):
        embedder = VocabularyEmbedder(['yes', 'no'])
        self.assertEqual(text_sim('yes', 'yes', embedder), 1.0)
        self.assertEqual(text_sim('yes', 'no', embedder), 0.0)

    def test_evaluate_alignment(self):
        texts = ['the cat sat on the mat', 'dogs run fast in parks']
        report, similarities = evaluate_alignment(texts, texts, VocabularyEmbedder(texts))
        self.assertEqual(similarities, [1.0, 1.0])
        self.assertAlmostEqual(report.bleu4, 1.0)
        self.assertAlmostEqual(report.cider, 10.0)
        self.assertEqual(report.pairs, 2)

    def test_scaled_views(self):
        report = AlignmentReport(bleu4=0.25, cider=0.5, text_sim=0.75)
        scaled = report.as_dict()['scaled']
        self.assertEqual(scaled, {'bleu4_x100': 25.0, 'cider_x100': 50.0, 'text_sim_x10': 7.5})

import math
from itertools import combinations

import numpy as np
from django.test import SimpleTestCase

from avrag.embedding import EmbeddingVector
from avrag.exceptions import DimensionError, EvaluationError, InvariantError
from avrag.sfs import (
    PenaltyKind,
    affinity_from_matrix,
    build_affinity,
    chain_cost,
    fuse_frame_streams,
    select_frames,
    separation_penalty,
    uniform_sample_indices,
)


def basis_frames(m):
    frames = []
    for position in range(m):
        values = [0.0] * m
        values[position] = 1.0
        frames.append(EmbeddingVector(tuple(values)))
    return frames


def random_frames(rng, m, dim=5):
    return [EmbeddingVector.from_array(rng.normal(size=dim)) for _ in range(m)]


def brute_force_cost(affinity, k, free_endpoint=False):
    m = affinity.m
    if free_endpoint:
        chains = combinations(range(1, m + 1), k)
    else:
        chains = (combo + (m,) for combo in combinations(range(1, m), k - 1))
    return min(chain_cost(affinity, chain) for chain in chains)


class SeparationPenaltyTests(SimpleTestCase):

    def test_sine_at_full_distance(self):
        self.assertAlmostEqual(separation_penalty(1.0, PenaltyKind.SINE, 20.0), -10.0)

    def test_cosine_at_full_distance(self):
        self.assertAlmostEqual(separation_penalty(1.0, PenaltyKind.COSINE, 10.0), -10.0)

    def test_exp(self):
        self.assertAlmostEqual(separation_penalty(0.5, PenaltyKind.EXP, 10.0, lam=5.0), 10.0 * (math.exp(2.5) - 1))

    def test_none_and_zero_distance(self):
        self.assertEqual(separation_penalty(0.7, PenaltyKind.NONE, 20.0), 0.0)
        for kind in (PenaltyKind.SINE, PenaltyKind.COSINE, PenaltyKind.EXP):
            self.assertEqual(separation_penalty(0.0, kind, 20.0), 0.0)

    def test_accepts_string_kind(self):
        self.assertAlmostEqual(separation_penalty(1.0, 'sine', 20.0), -10.0)


class BuildAffinityTests(SimpleTestCase):

    def test_sine_penalty_at_a_third(self):
        affinity = build_affinity(basis_frames(3), gamma=20.0, penalty_kind=PenaltyKind.SINE)
        self.assertAlmostEqual(affinity.entry(1, 2), -20.0 / 3.0)
        self.assertAlmostEqual(affinity.entry(2, 1), -20.0 / 3.0)

    def test_sine_penalty_at_a_half(self):
        affinity = build_affinity(basis_frames(4), gamma=20.0, penalty_kind=PenaltyKind.SINE)
        self.assertAlmostEqual(affinity.entry(1, 3), -20.0 * (math.sqrt(2) - 1))

    def test_cosine_penalty(self):
        affinity = build_affinity(basis_frames(3), gamma=10.0, penalty_kind=PenaltyKind.COSINE)
        self.assertAlmostEqual(affinity.entry(1, 2), 10.0 * (math.sqrt(3) / 2 - 1))
        affinity = build_affinity(basis_frames(4), gamma=10.0, penalty_kind=PenaltyKind.COSINE)
        self.assertAlmostEqual(affinity.entry(1, 3), 10.0 * (math.sqrt(2) / 2 - 1))

    def test_exp_penalty_uses_lambda(self):
        affinity = build_affinity(basis_frames(4), gamma=10.0, penalty_kind=PenaltyKind.EXP, lam=2.0)
        self.assertAlmostEqual(affinity.entry(1, 3), 10.0 * (math.exp(1.0) - 1))
        self.assertEqual(affinity.lam, 2.0)

    def test_penalty_table(self):
        # orthogonal frames, so every off-diagonal entry is the penalty alone
        expected = {
            ('sine', 20.0): lambda d: 20.0 * (1.0 / (math.sin(math.pi * d / 2) + 1.0) - 1.0),
            ('cosine', 10.0): lambda d: 10.0 * (math.cos(math.pi * d / 2) - 1.0),
            ('exp', 10.0): lambda d: 10.0 * (math.exp(5.0 * d) - 1.0),
        }
        for (kind, gamma), delta in expected.items():
            third = build_affinity(basis_frames(3), gamma=gamma, penalty_kind=kind, lam=5.0)
            half = build_affinity(basis_frames(4), gamma=gamma, penalty_kind=kind, lam=5.0)
            self.assertAlmostEqual(third.entry(1, 2), delta(1 / 3), delta=1e-9)
            self.assertAlmostEqual(half.entry(1, 3), delta(1 / 2), delta=1e-9)
            self.assertAlmostEqual(separation_penalty(1.0, kind, gamma, lam=5.0), delta(1.0), delta=1e-9)
        self.assertAlmostEqual(separation_penalty(1 / 3, 'exp', 10.0, lam=5.0), 42.944900505, delta=1e-6)
        self.assertAlmostEqual(separation_penalty(1.0, 'exp', 10.0, lam=5.0), 1474.131591026, delta=1e-6)

    def test_diagonal_is_self_similarity(self):
        affinity = build_affinity(random_frames(np.random.default_rng(1), 6), gamma=20.0)
        self.assertTrue(np.allclose(np.diag(affinity.q), 1.0))

    def test_matrix_is_symmetric_and_read_only(self):
        affinity = build_affinity(random_frames(np.random.default_rng(2), 7), gamma=20.0)
        self.assertTrue(np.array_equal(affinity.q, affinity.q.T))
        with self.assertRaises(ValueError):
            affinity.q[0, 0] = 5.0

    def test_raw_index_distance_clamps_sine(self):
        affinity = build_affinity(basis_frames(4), gamma=1.0, raw_index_distance=True)
        self.assertAlmostEqual(affinity.entry(1, 2), -0.5)
        self.assertAlmostEqual(affinity.entry(1, 3), 0.0)
        self.assertAlmostEqual(affinity.entry(1, 4), 1e6 - 1, delta=1e-3)

    def test_zero_norm_frame_logs_and_zeroes(self):
        frames = basis_frames(3) + [EmbeddingVector((0.0, 0.0, 0.0))]
        with self.assertLogs('avrag.sfs', 'WARNING') as logs:
            affinity = build_affinity(frames, gamma=0.0, penalty_kind=PenaltyKind.NONE)
        self.assertIn('frame 4', logs.output[0])
        self.assertEqual(len(affinity.warnings), 1)
        self.assertFalse(affinity.q[3, :].any())
        self.assertFalse(affinity.q[:, 3].any())

    def test_rejects_bad_inputs(self):
        with self.assertRaises(EvaluationError):
            build_affinity(basis_frames(1), gamma=1.0)
        with self.assertRaises(EvaluationError):
            build_affinity(basis_frames(3), gamma=-1.0)
        with self.assertRaises(DimensionError):
            build_affinity([EmbeddingVector((1.0,)), EmbeddingVector((1.0, 0.0))], gamma=1.0)

    def test_overflow_is_reported(self):
        with self.assertRaises(EvaluationError):
            build_affinity(basis_frames(3), gamma=1.0, penalty_kind=PenaltyKind.EXP, lam=1e6)

    def test_fuse_frame_streams(self):
        fused = fuse_frame_streams(
            [EmbeddingVector((1.0, 2.0)), EmbeddingVector((3.0, 1.0))],
            [EmbeddingVector((2.0, 0.5)), EmbeddingVector((1.0, 1.0))],
        )
        self.assertEqual(fused, [EmbeddingVector((2.0, 1.0)), EmbeddingVector((3.0, 1.0))])
        with self.assertRaises(DimensionError):
            fuse_frame_streams([EmbeddingVector((1.0,))], [])

    def test_affinity_from_matrix_requires_square(self):
        with self.assertRaises(InvariantError):
            affinity_from_matrix(np.zeros((2, 3)))


class SelectFramesTests(SimpleTestCase):

    def test_identical_frames_take_earliest_optimal_predecessors(self):
        frames = [EmbeddingVector((1.0, 1.0))] * 6
        affinity = build_affinity(frames, gamma=0.0, penalty_kind=PenaltyKind.NONE)
        plan = select_frames(affinity, 3)
        self.assertEqual(plan.selected, (1, 2, 6))
        self.assertAlmostEqual(plan.cost, 2.0)
        self.assertEqual(plan.end_frame, 6)

    def test_k_equals_m_selects_every_frame(self):
        affinity = build_affinity(random_frames(np.random.default_rng(4), 5), gamma=20.0)
        self.assertEqual(select_frames(affinity, 5).selected, (1, 2, 3, 4, 5))

    def test_k_one_selects_last_frame(self):
        affinity = build_affinity(random_frames(np.random.default_rng(4), 5), gamma=20.0)
        plan = select_frames(affinity, 1)
        self.assertEqual(plan.selected, (5,))
        self.assertEqual(plan.cost, 0.0)

    def test_k_out_of_range(self):
        affinity = build_affinity(basis_frames(3), gamma=1.0)
        for k in (0, 4):
            with self.assertRaises(EvaluationError):
                select_frames(affinity, k)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for trial in range(120):
            m = int(rng.integers(2, 13))
            k = int(rng.integers(1, min(m, 5) + 1))
            kind = list(PenaltyKind)[trial % 4]
            affinity = build_affinity(random_frames(rng, m), gamma=float(rng.uniform(0, 20)), penalty_kind=kind)
            plan = select_frames(affinity, k)
            best = brute_force_cost(affinity, k)
            self.assertEqual(len(plan.selected), k)
            self.assertEqual(list(plan.selected), sorted(set(plan.selected)))
            self.assertEqual(plan.selected[-1], m)
            self.assertAlmostEqual(plan.cost, best, delta=1e-12 * max(1.0, abs(best)))
            self.assertAlmostEqual(chain_cost(affinity, plan.selected), plan.cost, delta=1e-12 * max(1.0, abs(best)))

    def test_free_endpoint_matches_brute_force(self):
        rng = np.random.default_rng(43)
        for _ in range(40):
            m = int(rng.integers(2, 8))
            k = int(rng.integers(1, m + 1))
            affinity = build_affinity(random_frames(rng, m), gamma=float(rng.uniform(0, 20)))
            plan = select_frames(affinity, k, free_endpoint=True)
            self.assertAlmostEqual(plan.cost, brute_force_cost(affinity, k, free_endpoint=True), places=12)
            self.assertLessEqual(plan.cost, select_frames(affinity, k).cost + 1e-12)

    def test_shifting_affinity_keeps_selection(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            m = int(rng.integers(3, 13))
            k = int(rng.integers(1, min(m, 5) + 1))
            q = rng.integers(-8, 8, size=(m, m)) / 8.0
            plan = select_frames(affinity_from_matrix(q), k)
            for shift in (0.375, -1.25, 4.0):
                shifted = select_frames(affinity_from_matrix(q + shift), k)
                self.assertEqual(shifted.selected, plan.selected)
                self.assertEqual(shifted.cost, plan.cost + (k - 1) * shift)

    def test_is_deterministic(self):
        affinity = build_affinity(random_frames(np.random.default_rng(10), 12), gamma=20.0)
        first = select_frames(affinity, 4)
        for _ in range(5):
            self.assertEqual(select_frames(affinity, 4).selected, first.selected)


class UniformSampleTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(uniform_sample_indices(8, 4), [1, 3, 6, 8])
        self.assertEqual(uniform_sample_indices(5, 5), [1, 2, 3, 4, 5])
        self.assertEqual(uniform_sample_indices(10, 2), [1, 10])
        self.assertEqual(uniform_sample_indices(7, 1), [4])
        self.assertEqual(uniform_sample_indices(9, 3), [1, 5, 9])
        self.assertEqual(uniform_sample_indices(5, 1), [3])
        self.assertEqual(uniform_sample_indices(10, 10), list(range(1, 11)))

    def test_strictly_increasing_and_in_range(self):
        for total in range(1, 30):
            for m in range(1, total + 1):
                indices = uniform_sample_indices(total, m)
                self.assertEqual(len(indices), m)
                self.assertEqual(indices, sorted(set(indices)))
                self.assertGreaterEqual(indices[0], 1)
                self.assertLessEqual(indices[-1], total)

    def test_rejects_oversampling(self):
        with self.assertRaises(EvaluationError):
            uniform_sample_indices(3, 4)

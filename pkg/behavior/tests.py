from django.test import SimpleTestCase

import io
import math

import numpy as np

from graphs.digraph import DirectedGraph
from behavior.categories import (
    CATEGORY_ORDER, ProportionError, TransitionError, TransitionMatrix, UserCategory,
    assign_categories, load_transition_matrix, save_transition_matrix, step_category,
)
from behavior.shifts import (
    DistributionError, ShiftDistribution, load_shift_distribution, sample_shift,
    save_shift_distribution, synthetic_shift_distribution,
)

AMP, ATN, CC = UserCategory.AMPLIFIER, UserCategory.ATTENUATOR, UserCategory.COPYCAT


def empty_graph(n):
    return DirectedGraph.from_edges([], [], n)


class AssignCategoriesTests(SimpleTestCase):
    """Tests for random category assignment"""

    def test_twitter_proportions(self):
        """5.3% amplifiers and 1.4% attenuators of 1000 users"""
        profile = assign_categories(empty_graph(1000), (0.053, 0.014, 0.933), 0.47, seed=1)
        self.assertEqual(profile.counts(), {AMP: 53, ATN: 14, CC: 933})

    def test_changing_fraction(self):
        """47% of 100 users are changing"""
        profile = assign_categories(empty_graph(100), (0.053, 0.014, 0.933), 0.47, seed=2)
        self.assertEqual(int(profile.changing.sum()), 47)

    def test_all_amplifiers(self):
        profile = assign_categories(empty_graph(10), (1, 0, 0), 0.0, seed=3)
        self.assertTrue(np.all(profile.category == AMP))

    def test_remainder_goes_to_copycats(self):
        """Rounding leftovers are copycats"""
        profile = assign_categories(empty_graph(7), (0.5, 0.5, 0.0), 0.0, seed=4)
        counts = profile.counts()
        self.assertEqual(counts[AMP], 4)
        self.assertEqual(counts[ATN], 3)
        self.assertEqual(counts[CC], 0)

    def test_deterministic_for_seed(self):
        first = assign_categories(empty_graph(500), (0.053, 0.014, 0.933), 0.47, seed=9)
        second = assign_categories(empty_graph(500), (0.053, 0.014, 0.933), 0.47, seed=9)
        np.testing.assert_array_equal(first.category, second.category)
        np.testing.assert_array_equal(first.changing, second.changing)

    def test_invalid_proportions(self):
        """Fractions must be non-negative and sum to one"""
        with self.assertRaises(ProportionError):
            assign_categories(empty_graph(10), (0.5, 0.6, 0.0), 0.1, seed=0)
        with self.assertRaises(ProportionError):
            assign_categories(empty_graph(10), (-0.1, 0.1, 1.0), 0.1, seed=0)
        with self.assertRaises(ProportionError):
            assign_categories(empty_graph(10), (0.1, 0.1, 0.8), 1.5, seed=0)

    def test_bot_rows_are_static_copycats(self):
        """Padding adds non-changing copycats"""
        profile = assign_categories(empty_graph(10), (1, 0, 0), 1.0, seed=0).with_bots(3)
        self.assertEqual(profile.node_count, 13)
        self.assertTrue(np.all(profile.category[10:] == CC))
        self.assertFalse(profile.changing[10:].any())


class TransitionMatrixTests(SimpleTestCase):
    """Tests for category transition dynamics"""

    def setUp(self):
        self.matrix = TransitionMatrix.default()

    def test_amplifier_row(self):
        """Stay probability is the complement of the listed changes"""
        self.assertAlmostEqual(self.matrix.probability(AMP, CC), 0.2903)
        self.assertAlmostEqual(self.matrix.probability(AMP, ATN), 0.0314)
        self.assertAlmostEqual(self.matrix.probability(AMP, AMP), 0.6783)

    def test_rows_are_stochastic(self):
        np.testing.assert_allclose(self.matrix.stochastic().sum(axis=1), 1.0)

    def test_non_changing_user_never_moves(self):
        """Non-changing users keep their category for any draw"""
        for draw in np.linspace(0, 0.999999, 101):
            self.assertEqual(step_category(CC, False, self.matrix, draw), CC)
            self.assertEqual(step_category(AMP, False, self.matrix, draw), AMP)
        draws = np.random.default_rng(0).random(1000)
        categories = np.full(1000, ATN, dtype=np.int8)
        unchanged = self.matrix.step_many(categories, np.zeros(1000, dtype=bool), draws)
        np.testing.assert_array_equal(unchanged, categories)

    def test_attenuator_to_amplifier_frequency(self):
        """Monte-Carlo frequency over a million draws"""
        n = 1_000_000
        draws = np.random.default_rng(12345).random(n)
        moved = self.matrix.step_many(np.full(n, ATN, dtype=np.int8), np.ones(n, dtype=bool), draws)
        self.assertAlmostEqual(np.mean(moved == AMP), 0.0347, delta=0.001)

    def test_all_transition_frequencies(self):
        """Every off-diagonal frequency lies within three binomial standard deviations"""
        n = 1_000_000
        rng = np.random.default_rng(777)
        for source in CATEGORY_ORDER:
            moved = self.matrix.step_many(np.full(n, source, dtype=np.int8), np.ones(n, dtype=bool), rng.random(n))
            for target in CATEGORY_ORDER:
                if source == target:
                    continue
                p = self.matrix.probability(source, target)
                bound = 3 * math.sqrt(p * (1 - p) / n) + 1e-12
                self.assertLessEqual(abs(np.mean(moved == target) - p), bound)

    def test_vectorised_matches_scalar(self):
        """step_many agrees with step_category draw by draw"""
        rng = np.random.default_rng(5)
        categories = rng.integers(0, 3, 500).astype(np.int8)
        changing = rng.random(500) < 0.5
        draws = rng.random(500)
        vectorised = self.matrix.step_many(categories, changing, draws)
        for i in range(500):
            self.assertEqual(vectorised[i], step_category(categories[i], changing[i], self.matrix, draws[i]))

    def test_invalid_matrix(self):
        with self.assertRaises(TransitionError):
            TransitionMatrix(np.array([[0, 0.7, 0.6], [0, 0, 0], [0, 0, 0]]))
        with self.assertRaises(TransitionError):
            TransitionMatrix(np.array([[0, -0.1, 0], [0, 0, 0], [0, 0, 0]]))

    def test_default_when_no_file(self):
        self.assertEqual(load_transition_matrix(None), self.matrix)

    def test_file_round_trip(self):
        stream = io.StringIO()
        save_transition_matrix(self.matrix, stream)
        loaded = load_transition_matrix(io.StringIO(stream.getvalue()))
        self.assertEqual(loaded, self.matrix)

    def test_missing_entries_are_zero(self):
        loaded = load_transition_matrix(b'amplifier,copycat,0.25\n')
        self.assertEqual(loaded.probability(AMP, CC), 0.25)
        self.assertEqual(loaded.probability(ATN, AMP), 0.0)
        self.assertEqual(loaded.probability(CC, CC), 1.0)

    def test_stay_entry_rejected(self):
        with self.assertRaises(TransitionError):
            load_transition_matrix(io.StringIO('from,to,prob\ncopycat,copycat,0.5\n'))


class SyntheticShiftTests(SimpleTestCase):
    """Tests for the parametric shift distribution"""

    def setUp(self):
        self.dist = synthetic_shift_distribution()

    def test_copycat_range(self):
        """Copycat shifts stay in [-0.05, 0.05] for any input"""
        rng = np.random.default_rng(0)
        for value in np.linspace(0, 1, 41):
            shift = sample_shift(self.dist, CC, float(value), rng)
            self.assertGreaterEqual(shift, -0.05)
            self.assertLessEqual(shift, 0.05)

    def test_amplifier_at_zero_input(self):
        """Amplifier shift at input 0 lies in [0.35, 0.55] with mean 0.45"""
        rng = np.random.default_rng(1)
        n = 100_000
        shifts = self.dist.sample_many(np.full(n, AMP), np.zeros(n), rng.random(n), rng.random(n))
        self.assertGreaterEqual(shifts.min(), 0.35)
        self.assertLessEqual(shifts.max(), 0.55)
        self.assertAlmostEqual(shifts.mean(), 0.45, delta=0.01)

    def test_supports_within_twitter_ranges(self):
        low, high = self.dist.support(AMP)
        self.assertGreaterEqual(low, 0.0)
        self.assertLessEqual(high, 0.9)
        low, high = self.dist.support(ATN)
        self.assertGreaterEqual(low, -0.7)
        self.assertLessEqual(high, 0.2)

    def test_expected_output_is_monotone(self):
        """I + E[shift | I] is non-decreasing for every category"""
        self.assertTrue(self.dist.is_monotone())
        midpoints, expected = self.dist.expected_output(CC)
        np.testing.assert_allclose(expected, midpoints, atol=1e-12)

    def test_last_bin_right_closed(self):
        """Input 1.0 falls in the last bin"""
        shifts = self.dist.shifts_for(ATN)
        self.assertEqual(int(shifts.input_bin(np.array([1.0]))[0]), 19)
        self.assertEqual(int(shifts.input_bin(np.array([0.0]))[0]), 0)

    def test_samples_within_bins(self):
        """Vectorised draws stay inside the category support"""
        rng = np.random.default_rng(2)
        n = 20_000
        categories = rng.integers(0, 3, n)
        shifts = self.dist.sample_many(categories, rng.random(n), rng.random(n), rng.random(n))
        for category in CATEGORY_ORDER:
            low, high = self.dist.support(category)
            picked = shifts[categories == category]
            self.assertGreaterEqual(picked.min(), low)
            self.assertLessEqual(picked.max(), high)

    def test_point_mass(self):
        """A single degenerate bin always yields its value"""
        dist = ShiftDistribution.point_mass(0.1)
        rng = np.random.default_rng(3)
        for _ in range(20):
            self.assertEqual(sample_shift(dist, AMP, float(rng.random()), rng), 0.1)

    def test_input_outside_unit_interval(self):
        with self.assertRaises(DistributionError):
            sample_shift(self.dist, CC, 1.2, np.random.default_rng(0))

    def test_invalid_bin_count(self):
        with self.assertRaises(DistributionError):
            synthetic_shift_distribution(bins=0)


class ShiftFileTests(SimpleTestCase):
    """Tests for the shift-distribution CSV"""

    def test_single_row(self):
        dist = load_shift_distribution(b'copycat,0,1,-0.01,0.01,1.0\n')
        self.assertIn(CC, dist)
        self.assertEqual(dist.support(CC), (-0.01, 0.01))

    def test_negative_density(self):
        with self.assertRaises(DistributionError):
            load_shift_distribution(b'copycat,0,1,-0.01,0.01,-0.1\n')

    def test_gap_in_input_coverage(self):
        with self.assertRaisesMessage(DistributionError, 'gap'):
            load_shift_distribution(b'copycat,0,0.5,-0.01,0.01,1.0\n')
        with self.assertRaisesMessage(DistributionError, 'gap'):
            load_shift_distribution(
                b'copycat,0,0.4,-0.01,0.01,1.0\ncopycat,0.5,1,-0.01,0.01,1.0\n'
            )

    def test_overlapping_bins(self):
        with self.assertRaisesMessage(DistributionError, 'overlapping'):
            load_shift_distribution(
                b'copycat,0,0.6,-0.01,0.01,1.0\ncopycat,0.5,1,-0.01,0.01,1.0\n'
            )
        with self.assertRaisesMessage(DistributionError, 'overlapping'):
            load_shift_distribution(
                b'copycat,0,1,-0.1,0.1,0.5\ncopycat,0,1,0.0,0.2,0.5\n'
            )

    def test_renormalised_within_tolerance(self):
        dist = load_shift_distribution(
            io.StringIO('category,input_lo,input_hi,shift_lo,shift_hi,density\n'
                        'amplifier,0,1,0.0,0.1,0.5\namplifier,0,1,0.1,0.2,0.505\n')
        )
        density = dist.shifts_for(AMP).histograms[0].density
        self.assertAlmostEqual(float(density.sum()), 1.0, places=12)

    def test_bad_density_sum(self):
        with self.assertRaises(DistributionError):
            load_shift_distribution(b'amplifier,0,1,0.0,0.1,0.5\namplifier,0,1,0.1,0.2,0.4\n')

    def test_unknown_category(self):
        with self.assertRaises(DistributionError):
            load_shift_distribution(b'troll,0,1,0.0,0.1,1.0\n')

    def test_missing_category_sampling(self):
        """Sampling a category absent from the file is a configuration error"""
        dist = load_shift_distribution(b'copycat,0,1,-0.01,0.01,1.0\n')
        with self.assertRaises(DistributionError):
            sample_shift(dist, AMP, 0.5, np.random.default_rng(0))

    def test_round_trip(self):
        """Saving and reloading keeps every density"""
        original = synthetic_shift_distribution(bins=10)
        stream = io.StringIO()
        save_shift_distribution(original, stream)
        loaded = load_shift_distribution(io.StringIO(stream.getvalue()))
        for category in CATEGORY_ORDER:
            for a, b in zip(original.shifts_for(category).histograms, loaded.shifts_for(category).histograms):
                np.testing.assert_allclose(a.density, b.density, atol=1e-9)
                np.testing.assert_allclose(a.lo, b.lo, atol=1e-12)

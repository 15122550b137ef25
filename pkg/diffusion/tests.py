from django.test import SimpleTestCase

import io

import numpy as np

from graphs.digraph import DirectedGraph, generate_er
from behavior.categories import CategoryProfile, TransitionMatrix, UserCategory, assign_categories
from behavior.shifts import ShiftDistribution, synthetic_shift_distribution
from diffusion.engine import (
    MetricsSeries, SimulationConfig, SimulationError, SimulationState,
    avg_incoming_toxicity, incoming_averages, read_metrics_csv, run, seed_toxicity,
    step_hop, write_metrics_csv,
)
from diffusion.streams import RngStreams

TWITTER = (0.053, 0.014, 0.933)


def copycats(n, changing=False):
    return CategoryProfile(
        category=np.full(n, UserCategory.COPYCAT, dtype=np.int8),
        changing=np.full(n, changing, dtype=bool),
    )


def state_with(g, toxicity, active, profile=None):
    state = SimulationState.initial(g, profile or copycats(g.user_count))
    return SimulationState(
        toxicity=np.asarray(toxicity, dtype=float),
        active=np.asarray(active, dtype=bool) | state.is_bot,
        category=state.category,
        changing=state.changing,
        is_bot=state.is_bot,
    )


def no_draws(n):
    return np.zeros((n, 3))


class RngStreamsTests(SimpleTestCase):
    """Tests for derived random streams"""

    def test_hop_draws_repeatable(self):
        streams = RngStreams(7, run_index=2)
        np.testing.assert_array_equal(streams.hop_draws(5, 100), RngStreams(7, 2).hop_draws(5, 100))

    def test_rows_do_not_depend_on_node_count(self):
        """Appending nodes never changes existing rows"""
        streams = RngStreams(11)
        np.testing.assert_array_equal(streams.hop_draws(3, 50), streams.hop_draws(3, 80)[:50])

    def test_streams_are_distinct(self):
        streams = RngStreams(11)
        self.assertFalse(np.array_equal(streams.hop_draws(0, 20), streams.hop_draws(1, 20)))
        self.assertFalse(np.array_equal(RngStreams(11, 0).hop_draws(0, 20), RngStreams(11, 1).hop_draws(0, 20)))
        self.assertNotEqual(streams.seeding.random(), streams.categories.random())
        self.assertEqual(streams.bot_seed, RngStreams(11).bot_seed)
        self.assertNotEqual(streams.bot_seed, RngStreams(11, 1).bot_seed)


class SimulationConfigTests(SimpleTestCase):
    """Tests for simulation configuration"""

    def test_weeks_to_hops(self):
        config = SimulationConfig.for_weeks(8, hops_per_week=4)
        self.assertEqual(config.kiter, 32)
        self.assertEqual(config.weeks, 8)

    def test_rejected_values(self):
        with self.assertRaises(SimulationError):
            SimulationConfig(kiter=0)
        with self.assertRaises(SimulationError):
            SimulationConfig(hops_per_week=0)
        with self.assertRaises(SimulationError):
            SimulationConfig(initial_toxicity=(0.0, 0.5))
        with self.assertRaises(SimulationError):
            SimulationConfig(category_cadence='month')


class SeedToxicityTests(SimpleTestCase):
    """Tests for initial seeding"""

    def test_explicit_seed(self):
        g = DirectedGraph.from_edges([], [], 5)
        config = SimulationConfig(seed_nodes=[3], initial_toxicity=(0.8, 0.8))
        state = seed_toxicity(SimulationState.initial(g, copycats(5)), g, config, np.random.default_rng(0))
        np.testing.assert_array_equal(state.toxicity, [0, 0, 0, 0.8, 0])
        np.testing.assert_array_equal(state.active, [False, False, False, True, False])

    def test_seed_fraction(self):
        """1% of 10000 users are seeded"""
        g = DirectedGraph.from_edges([], [], 10000)
        state = seed_toxicity(SimulationState.initial(g, copycats(10000)), g, SimulationConfig(), np.random.default_rng(1))
        self.assertEqual(int(state.active.sum()), 100)

    def test_seed_values_in_range(self):
        g = DirectedGraph.from_edges([], [], 10000)
        config = SimulationConfig(seed_fraction=1.0, initial_toxicity=(0.5, 1.0))
        state = seed_toxicity(SimulationState.initial(g, copycats(10000)), g, config, np.random.default_rng(2))
        self.assertGreaterEqual(state.toxicity.min(), 0.5)
        self.assertLessEqual(state.toxicity.max(), 1.0)

    def test_empty_seed_set(self):
        g = DirectedGraph.from_edges([], [], 10)
        with self.assertRaises(SimulationError):
            seed_toxicity(SimulationState.initial(g, copycats(10)), g, SimulationConfig(seed_fraction=0.01), np.random.default_rng(0))
        with self.assertRaises(SimulationError):
            seed_toxicity(SimulationState.initial(g, copycats(10)), g, SimulationConfig(seed_nodes=[]), np.random.default_rng(0))


class IncomingToxicityTests(SimpleTestCase):
    """Tests for average incoming toxicity"""

    def test_mean_of_active_neighbors(self):
        g = DirectedGraph.from_edges([0, 1], [2, 2], 3)
        state = state_with(g, [0.4, 0.8, 0.0], [True, True, False])
        self.assertAlmostEqual(avg_incoming_toxicity(2, state, g), 0.6)

    def test_bot_counts_as_zero(self):
        """Four neighbours at 0.6 and one peace-bot give 0.48"""
        g = DirectedGraph.from_edges([0, 1, 2, 3], [4, 4, 4, 4], 5).augmented([5], [4], 1)
        state = state_with(g, [0.6, 0.6, 0.6, 0.6, 0.0, 0.0], [True] * 4 + [False, False])
        self.assertAlmostEqual(avg_incoming_toxicity(4, state, g), 0.48)
        averages, _ = incoming_averages(state, g)
        self.assertAlmostEqual(averages[4], 0.48)

    def test_inactive_neighbor_excluded(self):
        g = DirectedGraph.from_edges([0, 1], [2, 2], 3)
        state = state_with(g, [0.0, 0.7, 0.0], [False, True, False])
        self.assertAlmostEqual(avg_incoming_toxicity(2, state, g), 0.7)

    def test_not_computable(self):
        g = DirectedGraph.from_edges([0], [1], 2)
        state = state_with(g, [0.0, 0.0], [False, False])
        self.assertIsNone(avg_incoming_toxicity(1, state, g))
        averages, has_input = incoming_averages(state, g)
        self.assertFalse(has_input.any())
        self.assertTrue(np.isnan(averages).all())

    def test_vectorised_matches_scalar(self):
        g = generate_er(80, 0.08, seed=4)
        rng = np.random.default_rng(4)
        state = state_with(g, rng.random(80), rng.random(80) < 0.5)
        averages, has_input = incoming_averages(state, g)
        for v in range(80):
            expected = avg_incoming_toxicity(v, state, g)
            if expected is None:
                self.assertFalse(has_input[v])
            else:
                self.assertAlmostEqual(averages[v], expected, places=12)


class StepHopTests(SimpleTestCase):
    """Tests for one synchronous hop"""

    def setUp(self):
        self.matrix = TransitionMatrix.default()
        self.pair = DirectedGraph.from_edges([0], [1], 2)

    def test_copycat_zero_shift(self):
        g = DirectedGraph.from_edges([0, 1], [2, 2], 3)
        state = state_with(g, [0.4, 0.8, 0.0], [True, True, False])
        after = step_hop(state, g, ShiftDistribution.point_mass(0.0), self.matrix, no_draws(3))
        self.assertAlmostEqual(after.toxicity[2], 0.6)
        self.assertTrue(after.active[2])
        self.assertEqual(after.hop, 1)

    def test_clamped_above(self):
        state = state_with(self.pair, [0.9, 0.0], [True, False])
        after = step_hop(state, self.pair, ShiftDistribution.point_mass(0.3), self.matrix, no_draws(2))
        self.assertEqual(after.toxicity[1], 1.0)

    def test_clamped_below(self):
        state = state_with(self.pair, [0.1, 0.0], [True, False])
        after = step_hop(state, self.pair, ShiftDistribution.point_mass(-0.3), self.matrix, no_draws(2))
        self.assertEqual(after.toxicity[1], 0.0)
        self.assertTrue(after.active[1])

    def test_zero_clamped_inactive_flag(self):
        """With the flag off, a node clamped to 0 stops counting as active"""
        state = state_with(self.pair, [0.1, 0.0], [True, False])
        after = step_hop(
            state, self.pair, ShiftDistribution.point_mass(-0.3), self.matrix, no_draws(2),
            zero_clamped_active=False,
        )
        self.assertFalse(after.active[1])

    def test_isolated_node_keeps_toxicity(self):
        g = DirectedGraph.from_edges([1], [2], 3)
        state = state_with(g, [0.5, 0.3, 0.0], [True, True, False])
        dists = ShiftDistribution.point_mass(0.2)
        for _ in range(5):
            state = step_hop(state, g, dists, self.matrix, no_draws(3))
        self.assertEqual(state.toxicity[0], 0.5)
        self.assertEqual(state.toxicity[1], 0.3)

    def test_snapshot_semantics(self):
        """Updates read only the pre-hop state"""
        g = DirectedGraph.from_edges([0, 1], [1, 2], 3)
        state = state_with(g, [0.8, 0.0, 0.0], [True, False, False])
        after = step_hop(state, g, ShiftDistribution.point_mass(0.0), self.matrix, no_draws(3))
        np.testing.assert_allclose(after.toxicity, [0.8, 0.8, 0.0])
        self.assertFalse(after.active[2])

    def test_categories_follow_draws(self):
        """Updated changing users transition; others do not"""
        g = DirectedGraph.from_edges([0, 0], [1, 2], 3)
        profile = CategoryProfile(
            category=np.full(3, UserCategory.COPYCAT, dtype=np.int8),
            changing=np.array([True, True, False]),
        )
        state = state_with(g, [0.5, 0.0, 0.0], [True, False, False], profile)
        draws = np.zeros((3, 3))
        after = step_hop(state, g, ShiftDistribution.point_mass(0.0), self.matrix, draws)
        np.testing.assert_array_equal(after.category, [UserCategory.COPYCAT, UserCategory.AMPLIFIER, UserCategory.COPYCAT])

    def test_relabeling_invariance(self):
        """Permuting node ids and draw rows permutes the result"""
        n = 40
        g = generate_er(n, 0.12, seed=21)
        rng = np.random.default_rng(21)
        perm = rng.permutation(n)
        src, dst = g.edge_arrays
        relabeled = DirectedGraph.from_edges(perm[src], perm[dst], n)
        profile = assign_categories(g, TWITTER, 0.47, seed=21)

        def permuted(values):
            out = np.empty_like(values)
            out[perm] = values
            return out

        state = state_with(g, rng.random(n), rng.random(n) < 0.3, profile)
        other = SimulationState(
            toxicity=permuted(state.toxicity),
            active=permuted(state.active),
            category=permuted(state.category),
            changing=permuted(state.changing),
            is_bot=permuted(state.is_bot),
        )
        dists = synthetic_shift_distribution()
        for _ in range(6):
            draws = rng.random((n, 3))
            state = step_hop(state, g, dists, self.matrix, draws)
            other = step_hop(other, relabeled, dists, self.matrix, permuted(draws))
        np.testing.assert_allclose(other.toxicity[perm], state.toxicity, atol=1e-12)
        np.testing.assert_array_equal(other.active[perm], state.active)
        np.testing.assert_array_equal(other.category[perm], state.category)


class RunTests(SimpleTestCase):
    """Tests for full simulation runs"""

    def setUp(self):
        self.matrix = TransitionMatrix.default()

    def test_single_hop_single_row(self):
        g = DirectedGraph.from_edges([0], [1], 2)
        config = SimulationConfig(kiter=1, hops_per_week=1, seed_nodes=[0])
        series = run(g, copycats(2), ShiftDistribution.point_mass(0.0), self.matrix, config)
        self.assertEqual(len(series), 1)
        self.assertEqual(series.weeks, [1])

    def test_chain_reaches_end(self):
        """Seed 0.8 at the head of 0->1->2 reaches every node in two hops"""
        g = DirectedGraph.from_edges([0, 1], [1, 2], 3)
        config = SimulationConfig(kiter=2, hops_per_week=2, seed_nodes=[0], initial_toxicity=(0.8, 0.8))
        states = []
        run(g, copycats(3), ShiftDistribution.point_mass(0.0), self.matrix, config, observer=states.append)
        np.testing.assert_allclose(states[-1].toxicity, [0.8, 0.8, 0.8])

    def test_trailing_partial_week(self):
        g = DirectedGraph.from_edges([0], [1], 2)
        config = SimulationConfig(kiter=10, hops_per_week=4, seed_nodes=[0])
        series = run(g, copycats(2), ShiftDistribution.point_mass(0.0), self.matrix, config)
        self.assertEqual(series.weeks, [1, 2, 3])

    def test_zero_shift_fixpoint(self):
        """Uniform seeding at 0.8 on a strongly connected graph stays at total 80"""
        n = 100
        ring = np.arange(n)
        extra = generate_er(n, 0.05, seed=8).edge_arrays
        g = DirectedGraph.from_edges(
            np.concatenate([ring, extra[0]]), np.concatenate([(ring + 1) % n, extra[1]]), n,
        )
        profile = assign_categories(g, TWITTER, 0.47, seed=8)
        config = SimulationConfig(kiter=32, hops_per_week=4, seed_nodes=range(n), initial_toxicity=(0.8, 0.8))
        series = run(g, profile, ShiftDistribution.point_mass(0.0), self.matrix, config)
        self.assertEqual(len(series), 8)
        for record in series.records:
            self.assertAlmostEqual(record.total_toxicity, 80.0, delta=1e-9)
            self.assertAlmostEqual(record.total_toxicity, record.mean_toxicity * n, delta=1e-9)

    def test_clamp_and_determinism(self):
        """Every toxicity stays in [0, 1]; a fixed seed repeats bit for bit"""
        g = generate_er(1000, 0.005, seed=5)
        profile = assign_categories(g, TWITTER, 0.47, seed=5)
        dists = synthetic_shift_distribution()
        config = SimulationConfig.for_weeks(4, seed=5)

        def check(state):
            self.assertGreaterEqual(state.toxicity.min(), 0.0)
            self.assertLessEqual(state.toxicity.max(), 1.0)

        first = run(g, profile, dists, self.matrix, config, observer=check)
        second = run(g, profile, dists, self.matrix, config)
        self.assertEqual(first.records, second.records)

    def test_weekly_cadence(self):
        """Week cadence moves categories only at week boundaries"""
        g = generate_er(300, 0.02, seed=6)
        profile = assign_categories(g, TWITTER, 1.0, seed=6)
        config = SimulationConfig(kiter=3, hops_per_week=4, category_cadence='week', seed=6)
        states = []
        run(g, profile, synthetic_shift_distribution(), self.matrix, config, observer=states.append)
        for state in states:
            np.testing.assert_array_equal(state.category, profile.category)

    def test_profile_size_mismatch(self):
        g = DirectedGraph.from_edges([0], [1], 2)
        with self.assertRaises(SimulationError):
            run(g, copycats(5), ShiftDistribution.point_mass(0.0), self.matrix, SimulationConfig(seed_nodes=[0]))


class MetricsCsvTests(SimpleTestCase):
    """Tests for the metrics CSV"""

    def test_format(self):
        g = DirectedGraph.from_edges([0], [1], 2)
        config = SimulationConfig(kiter=2, hops_per_week=1, seed_nodes=[0], initial_toxicity=(0.5, 0.5))
        series = run(g, copycats(2), ShiftDistribution.point_mass(0.0), TransitionMatrix.default(), config, run_id='run0-baseline')
        stream = io.StringIO()
        write_metrics_csv([series], stream)
        self.assertEqual(stream.getvalue().splitlines(), [
            'run_id,week,total_toxicity,mean_toxicity,active_nodes',
            'run0-baseline,1,1.000000,0.500000,2',
            'run0-baseline,2,1.000000,0.500000,2',
        ])

    def test_read_back(self):
        series = MetricsSeries(run_id='a', user_count=4)
        g = DirectedGraph.from_edges([], [], 4)
        series.record(1, state_with(g, [0.25, 0.25, 0.0, 0.0], [True, True, False, False]))
        stream = io.StringIO()
        write_metrics_csv([series], stream)
        loaded = read_metrics_csv(io.StringIO(stream.getvalue()))
        self.assertEqual(len(loaded), 1)
        self.assertEqual(loaded[0].run_id, 'a')
        self.assertEqual(loaded[0].means.tolist(), [0.125])

    def test_bad_header(self):
        with self.assertRaises(SimulationError):
            read_metrics_csv(io.StringIO('week,total\n1,2\n'))

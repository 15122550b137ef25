from django.test import SimpleTestCase

import io

import numpy as np

from graphs.digraph import DirectedGraph, generate_er
from behavior.categories import TransitionMatrix, UserCategory, assign_categories
from behavior.shifts import synthetic_shift_distribution
from diffusion.engine import SimulationConfig, run
from intervention.bots import (
    DeploymentError, PlacementStrategy, bot_drop, bot_effect_on_average,
    deploy_bots, percentage_reduction,
)


def graph_with_indegrees(indegrees):
    """Users 0..k-1 with the given indegrees, fed by extra source users"""
    k = len(indegrees)
    src, dst = [], []
    next_source = k
    for v, d in enumerate(indegrees):
        for _ in range(d):
            src.append(next_source)
            dst.append(v)
            next_source += 1
    # sources point at each other so they are never the minimum
    extra = list(range(k, next_source))
    for a, b in zip(extra, extra[1:] + extra[:1]):
        if a != b:
            src.append(a)
            dst.append(b)
    return DirectedGraph.from_edges(src, dst, max(next_source, k))


class DeployBotsTests(SimpleTestCase):
    """Tests for peace-bot placement"""

    def test_lowest_indegree_minimum(self):
        g = graph_with_indegrees([0, 3, 5])
        deployment = deploy_bots(g, 1, PlacementStrategy.LOWEST_INDEGREE)
        self.assertEqual(deployment.targets.tolist(), [0])

    def test_lowest_indegree_tie_break(self):
        """Equal indegrees resolve by ascending node id"""
        g = DirectedGraph.from_edges([2, 3, 2, 3, 0, 1, 0, 1], [0, 0, 1, 1, 2, 2, 3, 3], 4)
        self.assertEqual(g.indegrees.tolist(), [2, 2, 2, 2])
        deployment = deploy_bots(g, 1, PlacementStrategy.LOWEST_INDEGREE)
        self.assertEqual(deployment.targets.tolist(), [0])

    def test_lowest_indegree_order(self):
        g = graph_with_indegrees([3, 0, 5, 1])
        deployment = deploy_bots(g, 2, 'li')
        self.assertEqual(deployment.targets.tolist(), [1, 3])

    def test_random_placement_deterministic(self):
        g = generate_er(500, 0.01, seed=1)
        first = deploy_bots(g, 50, PlacementStrategy.RANDOM, seed=99)
        second = deploy_bots(g, 50, PlacementStrategy.RANDOM, seed=99)
        np.testing.assert_array_equal(first.targets, second.targets)
        self.assertEqual(first.graph, second.graph)

    def test_random_targets_nested(self):
        """Smaller deployments are prefixes of larger ones for one seed"""
        g = generate_er(500, 0.01, seed=1)
        small = deploy_bots(g, 20, PlacementStrategy.RANDOM, seed=7)
        large = deploy_bots(g, 80, PlacementStrategy.RANDOM, seed=7)
        np.testing.assert_array_equal(large.targets[:20], small.targets)

    def test_bot_structure(self):
        """Each bot has one out-edge, no in-edges and a distinct user target"""
        g = generate_er(300, 0.02, seed=2)
        for strategy in (PlacementStrategy.RANDOM, PlacementStrategy.LOWEST_INDEGREE):
            deployment = deploy_bots(g, 120, strategy, seed=3)
            augmented = deployment.graph
            self.assertEqual(augmented.node_count, 420)
            self.assertEqual(augmented.user_count, 300)
            np.testing.assert_array_equal(deployment.bot_nodes, np.arange(300, 420))
            for bot, target in zip(deployment.bot_nodes, deployment.targets):
                self.assertEqual(augmented.out_neighbors(int(bot)).tolist(), [int(target)])
                self.assertEqual(augmented.in_neighbors(int(bot)).size, 0)
            self.assertEqual(len(set(deployment.targets.tolist())), 120)
            self.assertTrue((deployment.targets < 300).all())

    def test_augmentation_locality(self):
        """The user subgraph is untouched"""
        g = generate_er(200, 0.03, seed=4)
        deployment = deploy_bots(g, 30, PlacementStrategy.RANDOM, seed=4)
        self.assertTrue(deployment.graph.users_subgraph_equals(g))
        self.assertEqual(g.node_count, 200)

    def test_invalid_counts(self):
        g = generate_er(10, 0.2, seed=0)
        with self.assertRaises(DeploymentError):
            deploy_bots(g, 0, PlacementStrategy.RANDOM, seed=0)
        with self.assertRaises(DeploymentError):
            deploy_bots(g, 11, PlacementStrategy.LOWEST_INDEGREE)
        with self.assertRaises(DeploymentError):
            deploy_bots(g, 1, PlacementStrategy.BASELINE)

    def test_manifest(self):
        g = graph_with_indegrees([2, 0])
        deployment = deploy_bots(g, 1, PlacementStrategy.LOWEST_INDEGREE, seed=5)
        stream = io.StringIO()
        deployment.write_manifest(stream)
        self.assertEqual(stream.getvalue(), f'bot_id,target_id,strategy,seed\n{g.node_count},1,li,5\n')


class ReductionTests(SimpleTestCase):
    """Tests for reduction arithmetic"""

    def test_percentage_reduction(self):
        self.assertAlmostEqual(percentage_reduction(100.0, 90.0), 10.0)
        self.assertEqual(percentage_reduction(100.0, 100.0), 0.0)
        self.assertAlmostEqual(percentage_reduction(50.0, 55.0), -10.0)

    def test_zero_baseline(self):
        with self.assertRaises(DeploymentError):
            percentage_reduction(0.0, 1.0)

    def test_bot_effect_examples(self):
        self.assertAlmostEqual(bot_effect_on_average(0.6, 4), 0.48)
        for avg in (0.0, 0.3, 1.0):
            self.assertEqual(bot_effect_on_average(avg, 0), 0.0)

    def test_bot_effect_exhaustive(self):
        """Matches direct arithmetic and grows with indegree"""
        for tenth in range(11):
            avg = tenth / 10
            previous = None
            for indeg in range(101):
                value = bot_effect_on_average(avg, indeg)
                self.assertAlmostEqual(value, avg * indeg / (indeg + 1), delta=1e-12)
                if previous is not None:
                    if avg > 0:
                        self.assertGreater(value, previous)
                    else:
                        self.assertEqual(value, previous)
                previous = value

    def test_smaller_indegree_larger_drop(self):
        for indeg in range(1, 100):
            self.assertGreater(bot_drop(0.7, indeg), bot_drop(0.7, indeg + 1))


class BotsInRunTests(SimpleTestCase):
    """Tests for bots inside a simulation"""

    def test_bots_never_update(self):
        """Bot toxicity stays 0 and bot categories never change"""
        g = generate_er(400, 0.02, seed=6)
        deployment = deploy_bots(g, 40, PlacementStrategy.LOWEST_INDEGREE)
        profile = assign_categories(g, (0.053, 0.014, 0.933), 1.0, seed=6)
        bots = deployment.bot_nodes

        def check(state):
            self.assertTrue((state.toxicity[bots] == 0.0).all())
            self.assertTrue(state.active[bots].all())
            self.assertTrue((state.category[bots] == UserCategory.COPYCAT).all())

        run(
            deployment.graph, profile, synthetic_shift_distribution(), TransitionMatrix.default(),
            SimulationConfig.for_weeks(3, seed=6), observer=check,
        )

    def test_bots_excluded_from_metrics(self):
        g = generate_er(400, 0.02, seed=7)
        deployment = deploy_bots(g, 40, PlacementStrategy.RANDOM, seed=7)
        profile = assign_categories(g, (0.053, 0.014, 0.933), 0.47, seed=7)
        series = run(
            deployment.graph, profile, synthetic_shift_distribution(), TransitionMatrix.default(),
            SimulationConfig.for_weeks(2, seed=7),
        )
        self.assertEqual(series.user_count, 400)
        for record in series.records:
            self.assertLessEqual(record.active_nodes, 400)
            self.assertAlmostEqual(record.total_toxicity, record.mean_toxicity * 400, delta=1e-9)

from django.core.management import call_command
from django.test import SimpleTestCase

import io
import math
import os
import tempfile
import time

import networkx as nx
import numpy as np

from graphs.digraph import (
    DirectedGraph, GraphFormatError, GraphValidationError, NodeOutOfRange,
    generate_er, indegree, outdegree,
)
from graphs.edgelist import id_map_for, load_edge_list, load_id_map, save_edge_list, save_id_map


class DirectedGraphTests(SimpleTestCase):
    """Tests for the CSR graph structure"""

    def setUp(self):
        """Star graph with every leaf pointing at node 0"""
        self.star = DirectedGraph.from_edges([1, 2, 3], [0, 0, 0], 4)

    def test_degrees_of_star(self):
        """Indegree counts predecessors, outdegree successors"""
        self.assertEqual(indegree(self.star, 0), 3)
        self.assertEqual(outdegree(self.star, 0), 0)
        self.assertEqual(outdegree(self.star, 2), 1)

    def test_empty_graph_node(self):
        """A node with no edges has zero degrees"""
        graph = DirectedGraph.from_edges([], [], 5)
        self.assertEqual(indegree(graph, 4), 0)
        self.assertEqual(outdegree(graph, 4), 0)
        self.assertEqual(graph.edge_count, 0)

    def test_out_of_range_id(self):
        """Degree lookups reject ids outside [0, node_count)"""
        with self.assertRaises(NodeOutOfRange):
            indegree(self.star, 4)
        with self.assertRaises(IndexError):
            outdegree(self.star, -1)

    def test_self_loop_rejected(self):
        """Self-loops violate the graph invariants"""
        with self.assertRaises(GraphValidationError):
            DirectedGraph.from_edges([0, 1], [1, 1], 2)

    def test_duplicates_collapsed(self):
        """Parallel edges are stored once and counted"""
        graph = DirectedGraph.from_edges([0, 0, 0], [1, 1, 2], 3)
        self.assertEqual(graph.edge_count, 2)
        self.assertEqual(graph.dropped_duplicates, 1)

    def test_adjacency_symmetry(self):
        """Every u in in_adj[v] has v in out_adj[u]"""
        graph = generate_er(300, 0.02, seed=3)
        for v in range(graph.node_count):
            for u in graph.in_neighbors(v):
                self.assertTrue(graph.has_edge(int(u), v))
        self.assertEqual(int(graph.indegrees.sum()), graph.edge_count)
        self.assertEqual(int(graph.outdegrees.sum()), graph.edge_count)

    def test_augmented_copy_leaves_original(self):
        """Augmenting returns a new graph and keeps the user count"""
        graph = self.star.augmented([4], [1], 1)
        self.assertEqual(self.star.node_count, 4)
        self.assertEqual(graph.node_count, 5)
        self.assertEqual(graph.user_count, 4)
        self.assertEqual(graph.bot_count, 1)
        self.assertTrue(graph.users_subgraph_equals(self.star))


class GenerateERTests(SimpleTestCase):
    """Tests for Erdős–Rényi generation"""

    def test_zero_probability(self):
        """p=0 yields no edges"""
        self.assertEqual(generate_er(10, 0.0, seed=1).edge_count, 0)

    def test_complete_graph(self):
        """p=1 yields every ordered pair"""
        graph = generate_er(3, 1.0, seed=1)
        self.assertEqual(graph.edge_count, 6)
        for u in range(3):
            for v in range(3):
                if u != v:
                    self.assertTrue(graph.has_edge(u, v))

    def test_single_node(self):
        """A one-node graph has no possible edges"""
        self.assertEqual(generate_er(1, 0.5, seed=1).edge_count, 0)

    def test_invalid_arguments(self):
        """p outside [0, 1] and n == 0 are rejected"""
        with self.assertRaises(GraphValidationError):
            generate_er(10, 1.5, seed=1)
        with self.assertRaises(GraphValidationError):
            generate_er(10, -0.1, seed=1)
        with self.assertRaises(GraphValidationError):
            generate_er(0, 0.5, seed=1)

    def test_deterministic_for_seed(self):
        """The same seed gives the same graph, a different one does not"""
        self.assertEqual(generate_er(500, 0.01, seed=9), generate_er(500, 0.01, seed=9))
        self.assertNotEqual(generate_er(500, 0.01, seed=9), generate_er(500, 0.01, seed=10))

    def test_no_self_loops(self):
        """Generated graphs never contain self-loops"""
        src, dst = generate_er(400, 0.05, seed=2).edge_arrays
        self.assertFalse(np.any(src == dst))

    def test_edge_count_within_three_sd(self):
        """Mean edge count over 5 seeds lies within 3 sd of n(n-1)p"""
        n, p = 2000, 0.001
        expected = n * (n - 1) * p
        sd = math.sqrt(n * (n - 1) * p * (1 - p))
        counts = [generate_er(n, p, seed=s).edge_count for s in range(5)]
        self.assertLess(abs(np.mean(counts) - expected), 3 * sd)

    def test_pair_frequencies_are_uniform(self):
        """Every ordered pair is equally likely to be an edge"""
        n, p = 6, 0.3
        hits = np.zeros((n, n))
        for s in range(2000):
            src, dst = generate_er(n, p, seed=s).edge_arrays
            hits[src, dst] += 1
        off_diagonal = hits[~np.eye(n, dtype=bool)] / 2000
        self.assertTrue(np.all(np.abs(off_diagonal - p) < 0.05))
        self.assertEqual(np.trace(hits), 0)

    def test_large_edge_counts(self):
        """25K and 100K nodes at p=0.0005 land within 2% of 312K and 5M edges; 100K builds within a minute"""
        for n, target in [(25000, 312_487), (100000, 4_999_950)]:
            started = time.perf_counter()
            graph = generate_er(n, 0.0005, seed=7)
            self.assertLess(time.perf_counter() - started, 60.0)
            self.assertLess(abs(graph.edge_count - target) / target, 0.02)


class EdgeListTests(SimpleTestCase):
    """Tests for edge-list reading and writing"""

    def test_direct_encoding(self):
        """Two lines give a three-node path"""
        graph = load_edge_list(io.BytesIO(b'0 1\n1 2\n'))
        self.assertEqual(graph.node_count, 3)
        self.assertTrue(graph.has_edge(0, 1))
        self.assertTrue(graph.has_edge(1, 2))
        self.assertEqual(graph.edge_count, 2)

    def test_duplicate_lines(self):
        """Duplicate lines collapse into one edge"""
        graph = load_edge_list(io.BytesIO(b'0 1\n0 1\n'))
        self.assertEqual(graph.edge_count, 1)
        self.assertEqual(graph.dropped_duplicates, 1)

    def test_self_loop_line(self):
        """A self-loop line is a validation error"""
        with self.assertRaises(GraphValidationError):
            load_edge_list(io.BytesIO(b'5 5\n'))

    def test_self_loop_can_be_dropped(self):
        """Cleaning mode drops and counts self-loops"""
        graph = load_edge_list(io.BytesIO(b'0 1\n2 2\n'), drop_self_loops=True)
        self.assertEqual(graph.edge_count, 1)
        self.assertEqual(graph.dropped_self_loops, 1)

    def test_malformed_line_reports_line_number(self):
        """Parse errors carry the offending line number"""
        with self.assertRaises(GraphFormatError) as ctx:
            load_edge_list(io.BytesIO(b'# comment\n0 1\n1 x\n'))
        self.assertEqual(ctx.exception.line_number, 3)
        with self.assertRaises(GraphFormatError):
            load_edge_list(io.StringIO('0 1 2\n'))

    def test_comments_and_blank_lines(self):
        """Comment and blank lines are skipped"""
        graph = load_edge_list(io.StringIO('# header\n\n0 1\n'))
        self.assertEqual(graph.edge_count, 1)

    def test_round_trip(self):
        """Save then load reproduces an identical graph, isolated nodes included"""
        graph = generate_er(200, 0.01, seed=4)
        buffer = io.StringIO()
        save_edge_list(graph, buffer)
        buffer.seek(0)
        self.assertEqual(load_edge_list(buffer), graph)

    def test_remap_and_id_map_sidecar(self):
        """External ids are remapped densely and the map round-trips"""
        graph = load_edge_list(io.BytesIO(b'100 7\n7 42\n'), remap=True)
        self.assertEqual(graph.node_count, 3)
        self.assertEqual(id_map_for(graph), {7: 0, 42: 1, 100: 2})
        self.assertTrue(graph.has_edge(2, 0))
        buffer = io.StringIO()
        save_id_map(graph, buffer)
        buffer.seek(0)
        self.assertEqual(load_id_map(buffer), {7: 0, 42: 1, 100: 2})

    def test_matches_networkx(self):
        """Adjacency agrees with an independent networkx DiGraph"""
        graph = generate_er(150, 0.03, seed=8)
        src, dst = graph.edge_arrays
        reference = nx.DiGraph()
        reference.add_nodes_from(range(150))
        reference.add_edges_from(zip(src.tolist(), dst.tolist()))
        for v in range(150):
            self.assertEqual(sorted(graph.in_neighbors(v).tolist()), sorted(reference.predecessors(v)))
            self.assertEqual(outdegree(graph, v), reference.out_degree(v))


class GenerateCommandTests(SimpleTestCase):
    """Tests for the generate management command"""

    def test_generate_writes_edge_list(self):
        """The command writes a loadable edge list"""
        with tempfile.TemporaryDirectory() as out_dir:
            out = io.StringIO()
            call_command('generate', '--er-n', '50', '--er-p', '0.1', '--seed', '3', '--out-dir', out_dir, stdout=out)
            with open(os.path.join(out_dir, 'graph.edgelist'), 'rb') as f:
                graph = load_edge_list(f)
            self.assertEqual(graph, generate_er(50, 0.1, seed=3))
            self.assertIn('edges', out.getvalue())

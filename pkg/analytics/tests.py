from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

import io
import itertools
import math
import os
import tempfile

import numpy as np
import pandas as pd
from scipy import stats

from graphs.digraph import DirectedGraph, generate_er
from graphs.edgelist import save_edge_list
from behavior.categories import CATEGORY_ORDER, TransitionMatrix, UserCategory
from behavior.shifts import load_shift_distribution
from analytics.categorize import (
    CategoryAssignment, categorize_buckets, category_transitions, iqr_categorize,
    user_mean_shifts,
)
from analytics.errors import AnalyticsError, PostFormatError
from analytics.shifts import ShiftTable, compute_shifts, export_shift_distribution, read_posts
from analytics.stats import category_ranges, dependence_tests, has_homophily, homophily, kruskal_wallis

AMP, ATN, CC = UserCategory.AMPLIFIER, UserCategory.ATTENUATOR, UserCategory.COPYCAT


def write_post_fixture(directory, n=1000, p=0.01, buckets=4, seed=0):
    """
    A follower graph and scored posts with planted amplifiers and attenuators.

    Amplifiers post 0.4 above the 0.3 baseline, attenuators 0.25 below;
    30% of users redraw their category in about half of the buckets.
    Returns (graph path, posts path).
    """
    graph = generate_er(n, p, seed)
    rng = np.random.default_rng(seed)
    base = rng.choice(3, n, p=[0.06, 0.03, 0.91])
    changing = rng.random(n) < 0.3
    offsets = np.array([0.4, -0.25, 0.0])
    frames = []
    for bucket in range(buckets):
        current = base.copy()
        redraw = changing & (rng.random(n) < 0.5)
        current[redraw] = rng.choice(3, int(redraw.sum()))
        for _ in range(3):
            toxicity = np.clip(0.3 + offsets[current] + rng.normal(0, 0.02, n), 0, 1)
            frames.append(pd.DataFrame({'user_id': np.arange(n), 'bucket': bucket, 'toxicity': toxicity}))

    graph_path = os.path.join(directory, 'fixture.edgelist')
    posts_path = os.path.join(directory, 'posts.csv')
    with open(graph_path, 'w') as f:
        save_edge_list(graph, f)
    pd.concat(frames, ignore_index=True).to_csv(posts_path, index=False)
    return graph_path, posts_path


def posts_frame(rows):
    return pd.DataFrame(rows, columns=['user_id', 'bucket', 'toxicity'])


def shift_table(rows):
    """ShiftTable from (user, bucket, neigh_avg, shift) tuples"""
    frame = pd.DataFrame(rows, columns=['user', 'bucket', 'neigh_avg', 'shift'])
    frame['user_id'] = frame['user']
    frame['self_avg'] = frame['neigh_avg'] + frame['shift']
    return ShiftTable(frame=frame)


class ReadPostsTests(SimpleTestCase):
    """Tests for posts CSV ingestion"""

    def test_valid_file(self):
        frame = read_posts(b'user_id,bucket,toxicity\n1,0,0.5\n2,3,1.0\n')
        self.assertEqual(len(frame), 2)
        self.assertEqual(frame['bucket'].tolist(), [0, 3])

    def test_missing_header(self):
        with self.assertRaises(PostFormatError):
            read_posts(b'1,0,0.5\n2,3,1.0\n')

    def test_toxicity_out_of_range(self):
        with self.assertRaisesMessage(PostFormatError, 'row 2'):
            read_posts(b'user_id,bucket,toxicity\n1,0,0.5\n2,0,1.5\n')

    def test_negative_bucket(self):
        with self.assertRaises(PostFormatError):
            read_posts(b'user_id,bucket,toxicity\n1,-1,0.5\n')

    def test_non_numeric(self):
        with self.assertRaises(PostFormatError):
            read_posts(b'user_id,bucket,toxicity\nalice,0,0.5\n')

    def test_empty(self):
        with self.assertRaises(PostFormatError):
            read_posts(b'')


class ComputeShiftsTests(SimpleTestCase):
    """Tests for shift extraction"""

    def setUp(self):
        # users 1 and 2 follow into user 0
        self.graph = DirectedGraph.from_edges([1, 2], [0, 0], 3)

    def test_user_weighted_example(self):
        """Own mean 0.5 against neighbour means 0.2 and 0.4"""
        posts = posts_frame([
            (0, 3, 0.4), (0, 3, 0.6),
            (1, 3, 0.2),
            (2, 3, 0.3), (2, 3, 0.5), (2, 3, 0.4),
        ])
        table = compute_shifts(posts, self.graph)
        row = table.frame[table.frame['user'] == 0].iloc[0]
        self.assertAlmostEqual(row['self_avg'], 0.5)
        self.assertAlmostEqual(row['neigh_avg'], 0.3)
        self.assertAlmostEqual(row['shift'], 0.2)
        self.assertEqual(row['bucket'], 3)

    def test_post_weighting(self):
        """Pooling posts lets the prolific neighbour dominate"""
        posts = posts_frame([
            (0, 0, 0.5),
            (1, 0, 0.2),
            (2, 0, 0.4), (2, 0, 0.4), (2, 0, 0.4),
        ])
        table = compute_shifts(posts, self.graph, weighting='post')
        self.assertAlmostEqual(table.frame['neigh_avg'].iloc[0], 0.35)
        with self.assertRaises(AnalyticsError):
            compute_shifts(posts, self.graph, weighting='median')

    def test_no_neighbor_posts(self):
        posts = posts_frame([(0, 1, 0.5), (1, 2, 0.3)])
        self.assertEqual(len(compute_shifts(posts, self.graph)), 0)

    def test_identical_toxicity(self):
        graph = generate_er(60, 0.1, seed=1)
        posts = posts_frame([(u, b, 0.37) for u in range(60) for b in range(3)])
        table = compute_shifts(posts, graph)
        self.assertGreater(len(table), 0)
        np.testing.assert_allclose(table.frame['shift'], 0.0, atol=1e-12)

    def test_unresolved_users_counted(self):
        posts = posts_frame([(0, 0, 0.5), (1, 0, 0.2), (77, 0, 0.9), (78, 1, 0.1)])
        table = compute_shifts(posts, self.graph)
        self.assertEqual(table.unresolved_users, 2)
        self.assertEqual(len(table), 1)

    def test_id_map(self):
        """External ids resolve through the sidecar mapping"""
        posts = posts_frame([(500, 0, 0.5), (501, 0, 0.1)])
        table = compute_shifts(posts, self.graph, id_map={500: 0, 501: 1})
        self.assertAlmostEqual(table.frame['shift'].iloc[0], 0.4)
        self.assertEqual(table.frame['user_id'].iloc[0], 500)

    def test_shifts_bounded(self):
        graph = generate_er(100, 0.08, seed=2)
        rng = np.random.default_rng(2)
        posts = posts_frame([(u, b, rng.random()) for u in range(100) for b in range(4) for _ in range(2)])
        shifts = compute_shifts(posts, graph).frame['shift']
        self.assertGreaterEqual(shifts.min(), -1.0)
        self.assertLessEqual(shifts.max(), 1.0)


class IqrCategorizeTests(SimpleTestCase):
    """Tests for IQR outlier categorisation"""

    def test_single_large_outlier(self):
        """The 0.9 user is an amplifier"""
        shifts = pd.Series([-0.01] * 10 + [0.0] * 80 + [0.01] * 9 + [0.9])
        categories = iqr_categorize(shifts)
        self.assertEqual(categories.iloc[-1], AMP)
        # the bulk has zero IQR here, so the +-0.01 users also fall outside the whiskers
        self.assertTrue((categories.iloc[10:90] == CC).all())

    def test_spread_bulk_has_one_outlier(self):
        shifts = pd.Series(list(np.linspace(-0.05, 0.05, 99)) + [0.9])
        categories = iqr_categorize(shifts)
        self.assertEqual(categories.iloc[-1], AMP)
        self.assertTrue((categories.iloc[:-1] == CC).all())

    def test_matches_quantile_oracle(self):
        """Whiskers use linear-interpolation quartiles"""
        rng = np.random.default_rng(3)
        values = np.concatenate([rng.normal(0, 0.05, 200), [0.6, 0.7, -0.5]])
        ordered = np.sort(values)

        def quantile(q):
            position = q * (len(ordered) - 1)
            low = math.floor(position)
            high = min(low + 1, len(ordered) - 1)
            return ordered[low] + (position - low) * (ordered[high] - ordered[low])

        q1, q3 = quantile(0.25), quantile(0.75)
        upper, lower = q3 + 1.5 * (q3 - q1), q1 - 1.5 * (q3 - q1)
        categories = iqr_categorize(pd.Series(values))
        for value, category in zip(values, categories):
            expected = AMP if value > upper else ATN if value < lower else CC
            self.assertEqual(category, expected)

    def test_all_equal(self):
        categories = iqr_categorize(pd.Series([0.2] * 10))
        self.assertTrue((categories == CC).all())

    def test_mirrored(self):
        """Negating the shifts swaps amplifiers and attenuators"""
        rng = np.random.default_rng(4)
        shifts = pd.Series(np.concatenate([rng.normal(0, 0.03, 100), [0.5, 0.6, -0.4]]))
        forward = iqr_categorize(shifts)
        mirrored = iqr_categorize(-shifts)
        swap = {AMP: ATN, ATN: AMP, CC: CC}
        self.assertEqual([swap[c] for c in forward], list(mirrored))

    def test_partition(self):
        rng = np.random.default_rng(5)
        categories = iqr_categorize(pd.Series(rng.standard_t(2, 500)))
        self.assertEqual(len(categories), 500)
        self.assertTrue(categories.isin(list(CATEGORY_ORDER)).all())

    def test_too_few_users(self):
        with self.assertRaises(AnalyticsError):
            iqr_categorize(pd.Series([0.1, 0.2, 0.3]))

    def test_bucket_categories(self):
        table = shift_table(
            [(u, b, 0.3, 0.001 * u) for u in range(20) for b in range(2)]
            + [(20, 0, 0.3, 0.8), (20, 1, 0.3, 0.01)]
        )
        assignment = categorize_buckets(table)
        self.assertEqual(assignment.overall.loc[20], AMP)
        sequences = assignment.sequences()
        self.assertEqual(list(sequences[20]), [AMP, CC])
        self.assertTrue(assignment.changing.loc[20])
        self.assertFalse(assignment.changing.loc[5])
        self.assertAlmostEqual(user_mean_shifts(table).loc[20], 0.405)


class TransitionEstimateTests(SimpleTestCase):
    """Tests for category transition estimation"""

    def test_counting(self):
        """[cc, cc, amp] contributes one of two copycat transitions to cc->amp"""
        assignment = CategoryAssignment.from_sequences({0: [CC, CC, AMP]})
        matrix, fraction = category_transitions(assignment)
        self.assertEqual(matrix.probability(CC, AMP), 0.5)
        self.assertEqual(fraction, 1.0)

    def test_constant_sequences(self):
        assignment = CategoryAssignment.from_sequences({0: [CC, CC], 1: [AMP, AMP, AMP]})
        matrix, fraction = category_transitions(assignment)
        self.assertEqual(fraction, 0.0)
        self.assertEqual(matrix, TransitionMatrix(np.zeros((3, 3))))

    def test_gap_between_buckets_is_not_a_transition(self):
        """copycat in bucket 0 then amplifier in bucket 5 is not a copycat->amplifier step"""
        assignment = CategoryAssignment(
            overall=pd.Series([CC, CC], index=[0, 1], name='category'),
            buckets=pd.DataFrame({
                'user': [0, 0, 1, 1],
                'bucket': [0, 5, 0, 1],
                'category': [CC, AMP, CC, CC],
            }),
        )
        matrix, fraction = category_transitions(assignment, population='all')
        self.assertEqual(matrix.probability(CC, AMP), 0.0)
        self.assertEqual(fraction, 0.0)
        pairs = assignment.pairs()
        self.assertEqual(pairs['user'].tolist(), [1])

    def test_only_adjacent_pairs_counted(self):
        assignment = CategoryAssignment(
            overall=pd.Series([CC], index=[0], name='category'),
            buckets=pd.DataFrame({
                'user': [0, 0, 0, 0],
                'bucket': [0, 1, 3, 4],
                'category': [CC, AMP, CC, CC],
            }),
        )
        matrix, fraction = category_transitions(assignment)
        self.assertEqual(matrix.probability(CC, AMP), 0.5)
        self.assertEqual(fraction, 1.0)

    def test_single_bucket_users(self):
        with self.assertRaises(AnalyticsError):
            category_transitions(CategoryAssignment.from_sequences({0: [CC], 1: [AMP]}))

    def test_round_trip_default_matrix(self):
        """Sequences drawn from the default matrix recover it within 3 sigma"""
        users, buckets = 100_000, 10
        truth = TransitionMatrix.default()
        rng = np.random.default_rng(8)
        current = rng.choice(3, users, p=[0.053, 0.014, 0.933]).astype(np.int8)
        columns = [current]
        for _ in range(buckets - 1):
            current = truth.step_many(current, np.ones(users, dtype=bool), rng.random(users))
            columns.append(current)
        sequences = np.stack(columns, axis=1)
        assignment = CategoryAssignment(
            overall=pd.Series(sequences[:, 0]),
            buckets=pd.DataFrame({
                'user': np.repeat(np.arange(users), buckets),
                'bucket': np.tile(np.arange(buckets), users),
                'category': sequences.ravel(),
            }),
        )
        matrix, _ = category_transitions(assignment, population='all')
        sources = np.bincount(sequences[:, :-1].ravel(), minlength=3)
        for source, target in itertools.permutations(range(3), 2):
            p = truth.probability(source, target)
            sigma = math.sqrt(p * (1 - p) / sources[source])
            self.assertLessEqual(abs(matrix.probability(source, target) - p), 3 * sigma)


class HomophilyTests(SimpleTestCase):
    """Tests for within-label edge fractions"""

    def test_example(self):
        # A=0, B=1, C=2, D=3
        g = DirectedGraph.from_edges([0, 1, 2, 0], [1, 0, 3, 2], 4)
        report = homophily(g, ['p', 'p', 'q', 'q'])
        self.assertEqual(report.row('p').x, 0.5)
        self.assertEqual(report.row('p').x_squared, 0.25)
        self.assertEqual(report.row('q').x, 0.25)
        self.assertAlmostEqual(report.pairs['fraction'].sum(), 1.0)

    def test_single_label(self):
        g = generate_er(30, 0.1, seed=1)
        report = homophily(g, ['a'] * 30)
        self.assertEqual(report.row('a').x, 1.0)
        self.assertEqual(report.row('a').x_squared, 1.0)

    def test_table_values_are_not_homophily(self):
        self.assertFalse(has_homophily(0.869270, 0.822492))
        self.assertFalse(has_homophily(0.012234, 0.008665))
        self.assertTrue(has_homophily(0.6))

    def test_unlabelled_edges_excluded(self):
        g = DirectedGraph.from_edges([0, 1, 2], [1, 2, 0], 3)
        report = homophily(g, {0: 'p', 1: 'p'})
        self.assertEqual(report.labelled_edges, 1)
        self.assertEqual(report.excluded_edges, 2)
        self.assertEqual(report.row('p').x, 1.0)
        self.assertAlmostEqual(report.row('p').x_all_edges, 1 / 3)

    def test_no_labelled_edges(self):
        g = DirectedGraph.from_edges([0], [1], 2)
        with self.assertRaises(AnalyticsError):
            homophily(g, {0: 'p'})

    def test_brute_force_oracle(self):
        """Matches direct edge enumeration on random labelled graphs"""
        rng = np.random.default_rng(10)
        for trial in range(50):
            n = int(rng.integers(5, 200))
            g = generate_er(n, float(rng.uniform(0.01, 0.2)), seed=trial)
            if g.edge_count == 0:
                continue
            labels = [str(rng.choice(['p', 'q', 'r'])) if rng.random() < 0.9 else None for _ in range(n)]
            labelled = [
                (labels[u], labels[v])
                for u in range(n) for v in g.out_neighbors(u).tolist()
                if labels[u] is not None and labels[v] is not None
            ]
            if not labelled:
                continue
            report = homophily(g, labels)
            pair_fractions = {(r.source, r.target): r.fraction for r in report.pairs.itertuples()}
            for label in {l for l in labels if l is not None}:
                within = sum(1 for a, b in labelled if a == b == label)
                self.assertEqual(report.row(label).x, within / len(labelled))
                self.assertEqual(report.row(label).x_all_edges, within / g.edge_count)
            for pair in set(labelled):
                self.assertEqual(pair_fractions[pair], labelled.count(pair) / len(labelled))
            self.assertAlmostEqual(sum(pair_fractions.values()), 1.0)

    def test_relabel_invariance(self):
        g = generate_er(80, 0.05, seed=11)
        rng = np.random.default_rng(11)
        labels = [str(x) for x in rng.choice(['p', 'q'], 80)]
        perm = rng.permutation(80)
        src, dst = g.edge_arrays
        relabeled = DirectedGraph.from_edges(perm[src], perm[dst], 80)
        moved = [None] * 80
        for old, new in enumerate(perm):
            moved[new] = labels[old]
        for label in ('p', 'q'):
            self.assertEqual(homophily(g, labels).row(label).x, homophily(relabeled, moved).row(label).x)


class KruskalWallisTests(SimpleTestCase):
    """Tests for the Kruskal-Wallis H test"""

    def test_hand_computed(self):
        result = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        self.assertAlmostEqual(result.statistic, 7.2, places=12)
        self.assertAlmostEqual(result.pvalue, 0.0273237224, delta=1e-6)
        self.assertEqual(result.df, 2)

    def test_identical_groups(self):
        result = kruskal_wallis([[1, 2, 3], [1, 2, 3]])
        self.assertAlmostEqual(result.statistic, 0.0, places=12)
        self.assertAlmostEqual(result.pvalue, 1.0, places=9)

    def test_all_values_equal(self):
        result = kruskal_wallis([[4, 4], [4, 4, 4]])
        self.assertEqual(result.statistic, 0.0)
        self.assertEqual(result.pvalue, 1.0)

    def test_reference_implementation(self):
        """Agrees with scipy on random small fixtures, ties included"""
        rng = np.random.default_rng(12)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            groups = [rng.integers(0, 15, int(rng.integers(1, 12))).astype(float) for _ in range(k)]
            if sum(g.size for g in groups) < 3 or len(np.unique(np.concatenate(groups))) < 2:
                continue
            expected = stats.kruskal(*groups)
            result = kruskal_wallis(groups)
            self.assertAlmostEqual(result.statistic, expected.statistic, delta=1e-9)
            self.assertAlmostEqual(result.pvalue, expected.pvalue, delta=1e-6)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(13)
        groups = [rng.random(8), rng.random(5) + 0.3, rng.random(6)]
        plain = kruskal_wallis(groups)
        transformed = kruskal_wallis([np.exp(3 * g) for g in groups])
        self.assertAlmostEqual(plain.statistic, transformed.statistic, places=12)

    def test_invalid_groups(self):
        with self.assertRaises(AnalyticsError):
            kruskal_wallis([[1, 2, 3]])
        with self.assertRaises(AnalyticsError):
            kruskal_wallis([[1, 2], []])
        with self.assertRaises(AnalyticsError):
            kruskal_wallis([[1], [2]])


class DependenceTests(SimpleTestCase):
    """Tests for the shift dependence table"""

    def test_category_effect_detected(self):
        rng = np.random.default_rng(14)
        rows = []
        for user in range(300):
            offset = 0.4 if user < 20 else -0.3 if user < 30 else 0.0
            for bucket in range(3):
                rows.append((user, bucket, float(rng.random()), offset + rng.normal(0, 0.02)))
        table = shift_table(rows)
        assignment = categorize_buckets(table)
        results = dependence_tests(table, assignment, bins=5)
        self.assertEqual(set(results), {'category', 'input_toxicity', 'interaction'})
        self.assertLess(results['category'].pvalue, 1e-6)
        self.assertGreater(results['input_toxicity'].pvalue, 1e-3)
        per_user = dependence_tests(table, assignment, bins=5, observations='user')
        self.assertLess(per_user['category'].pvalue, 1e-6)


class ExportDistributionTests(SimpleTestCase):
    """Tests for shift distribution export"""

    def samples(self, rows):
        return pd.DataFrame(rows, columns=['category', 'neigh_avg', 'shift'])

    def test_single_sample(self):
        exported = export_shift_distribution(
            self.samples([(CC, 0.1, 0.2)]), bins=1, categories=[CC],
        )
        hist = exported.distribution.shifts_for(CC).histograms[0]
        self.assertEqual(hist.density.tolist(), [1.0])
        self.assertLessEqual(hist.lo[0], 0.2 + 1e-12)
        self.assertGreaterEqual(hist.hi[0], 0.2 - 1e-12)
        self.assertEqual(exported.filled_bins, [])

    def test_empty_bins_filled(self):
        exported = export_shift_distribution(
            self.samples([(CC, 0.1, 0.2)]), bins=4, categories=[CC],
        )
        self.assertEqual(exported.filled_bins, [(CC, 1), (CC, 2), (CC, 3)])
        filled = exported.distribution.shifts_for(CC).histograms[3]
        self.assertEqual((filled.lo[0], filled.hi[0], filled.density[0]), (0.0, 0.0, 1.0))

    def test_missing_category(self):
        with self.assertRaises(AnalyticsError):
            export_shift_distribution(self.samples([(CC, 0.1, 0.2)]))

    def test_round_trip(self):
        """Exported files load back with the same densities"""
        rng = np.random.default_rng(15)
        rows = [
            (category, float(rng.random()), float(np.clip(rng.normal(0.1 * (1 - category), 0.2), -1, 1)))
            for category in CATEGORY_ORDER for _ in range(2000)
        ]
        exported = export_shift_distribution(self.samples(rows), bins=20, shift_bins=40)
        stream = io.StringIO()
        exported.write(stream)
        loaded = load_shift_distribution(io.StringIO(stream.getvalue()))
        for category in CATEGORY_ORDER:
            original = exported.distribution.shifts_for(category).histograms
            reloaded = loaded.shifts_for(category).histograms
            self.assertEqual(len(original), len(reloaded))
            for a, b in zip(original, reloaded):
                np.testing.assert_allclose(a.density, b.density, atol=1e-9, rtol=0)
                np.testing.assert_array_equal(a.lo, b.lo)

    def test_uniform_samples(self):
        """Uniform shifts give densities that pass a chi-square fit"""
        rng = np.random.default_rng(16)
        n = 40_000
        rows = self.samples({'category': CC, 'neigh_avg': rng.random(n), 'shift': rng.uniform(-1, 1, n)})
        exported = export_shift_distribution(rows, bins=1, shift_bins=40, categories=[CC])
        hist = exported.distribution.shifts_for(CC).histograms[0]
        self.assertEqual(hist.density.size, 40)
        observed = hist.density * n
        self.assertGreater(stats.chisquare(observed).pvalue, 0.01)


class CategoryRangeTests(SimpleTestCase):
    """Tests for per-category input and shift ranges"""

    def test_quartiles_per_category(self):
        rows = [(u, 0, 0.1 * u, 0.01 * u) for u in range(1, 6)] + [(9, 0, 0.2, 0.4), (9, 1, 0.6, 0.3)]
        table = shift_table(rows)
        assignment = CategoryAssignment(
            overall=pd.Series([CC] * 5 + [AMP], index=[1, 2, 3, 4, 5, 9], name='category'),
            buckets=pd.DataFrame({
                'user': [1, 2, 3, 4, 5, 9, 9],
                'bucket': [0, 0, 0, 0, 0, 0, 1],
                'category': [CC] * 5 + [AMP, AMP],
            }),
        )
        ranges = category_ranges(table, assignment).set_index(['category', 'quantity'])
        copycat = ranges.loc[('copycat', 'neigh_avg')]
        self.assertEqual(copycat['samples'], 5)
        self.assertAlmostEqual(copycat['min'], 0.1)
        self.assertAlmostEqual(copycat['q1'], 0.2)
        self.assertAlmostEqual(copycat['median'], 0.3)
        self.assertAlmostEqual(copycat['q3'], 0.4)
        self.assertAlmostEqual(copycat['max'], 0.5)
        amplifier = ranges.loc[('amplifier', 'shift')]
        self.assertAlmostEqual(amplifier['min'], 0.3)
        self.assertAlmostEqual(amplifier['max'], 0.4)
        self.assertNotIn('attenuator', ranges.index.get_level_values('category'))


class AnalyzeCommandTests(SimpleTestCase):
    """Tests for the analyze management command"""

    def test_pipeline_outputs(self):
        with tempfile.TemporaryDirectory() as tmp:
            graph_path, posts_path = write_post_fixture(tmp)
            out_dir = os.path.join(tmp, 'analysis')
            out = io.StringIO()
            call_command('analyze', posts=posts_path, graph=graph_path, out_dir=out_dir, stdout=out)
            self.assertIn('Analysed', out.getvalue())
            for name in (
                'shifts.csv', 'categories.csv', 'homophily.csv', 'kruskal_wallis.csv',
                'transitions.csv', 'shift_distribution.csv', 'ranges.csv', 'summary.txt',
            ):
                self.assertTrue(os.path.exists(os.path.join(out_dir, name)), name)

            categories = pd.read_csv(os.path.join(out_dir, 'categories.csv'))
            counts = categories['category'].value_counts()
            self.assertGreater(counts['amplifier'], 20)
            self.assertGreater(counts['attenuator'], 10)
            self.assertGreater(categories['changing'].mean(), 0.05)

            with open(os.path.join(out_dir, 'shift_distribution.csv'), 'rb') as f:
                dist = load_shift_distribution(f)
            self.assertGreater(dist.expected_output(AMP)[1].mean(), dist.expected_output(ATN)[1].mean())

            summary = open(os.path.join(out_dir, 'summary.txt'), encoding='utf-8').read()
            self.assertIn('Kruskal-Wallis', summary)
            self.assertIn('Homophily', summary)
            self.assertIn('Ranges', summary)

            ranges = pd.read_csv(os.path.join(out_dir, 'ranges.csv'))
            amp_shift = ranges[(ranges['category'] == 'amplifier') & (ranges['quantity'] == 'shift')].iloc[0]
            atn_shift = ranges[(ranges['category'] == 'attenuator') & (ranges['quantity'] == 'shift')].iloc[0]
            self.assertGreater(amp_shift['median'], atn_shift['median'])

    def test_empty_category_keeps_other_outputs(self):
        """Posts at one constant toxicity leave amplifiers empty; only the distribution export is skipped"""
        with tempfile.TemporaryDirectory() as tmp:
            graph_path = os.path.join(tmp, 'g.edgelist')
            with open(graph_path, 'w') as f:
                save_edge_list(generate_er(200, 0.05, 3), f)
            posts_path = os.path.join(tmp, 'posts.csv')
            posts = posts_frame([(user, bucket, 0.5) for bucket in range(3) for user in range(200)])
            posts.to_csv(posts_path, index=False)
            out_dir = os.path.join(tmp, 'analysis')
            out = io.StringIO()
            call_command('analyze', posts=posts_path, graph=graph_path, out_dir=out_dir, stdout=out)
            self.assertIn('Shift distribution not exported', out.getvalue())
            self.assertFalse(os.path.exists(os.path.join(out_dir, 'shift_distribution.csv')))
            for name in ('shifts.csv', 'categories.csv', 'homophily.csv', 'kruskal_wallis.csv', 'ranges.csv', 'summary.txt'):
                self.assertTrue(os.path.exists(os.path.join(out_dir, name)), name)
            categories = pd.read_csv(os.path.join(out_dir, 'categories.csv'))
            self.assertEqual(set(categories['category']), {'copycat'})

    def test_bad_posts_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            graph_path = os.path.join(tmp, 'g.edgelist')
            with open(graph_path, 'w') as f:
                f.write('0 1\n')
            posts_path = os.path.join(tmp, 'posts.csv')
            with open(posts_path, 'w') as f:
                f.write('user,toxicity\n0,0.5\n')
            with self.assertRaises(CommandError):
                call_command('analyze', posts=posts_path, graph=graph_path, out_dir=tmp, stdout=io.StringIO())

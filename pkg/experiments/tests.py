from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

import csv
import io
import os
import re
import tempfile
import time
from pathlib import Path

import numpy as np

from analytics.tests import write_post_fixture
from diffusion.engine import MetricsSeries, WeekRecord, read_metrics_csv
from experiments.config import ConfigError, cast_config, form_data, load_config, read_config_file, resolve, write_resolved
from experiments.forms import ExperimentSpecForm, SimulationForm
from experiments.harness import ExperimentSpec, ReductionTable, execute_seed, run_experiment
from experiments.models import Experiment, ReductionResult
from experiments.plotting import PlotError, build_figure, emit_plot
from graphs.digraph import generate_er
from graphs.edgelist import save_edge_list


def small_spec(**overrides):
    values = dict(er_n=300, er_p=0.02, weeks=3, bots=(10, 30), runs=2, seed=7)
    values.update(overrides)
    return ExperimentSpec(**values)


def series_of(run_id, means):
    records = [WeekRecord(week, m * 100, m, 100) for week, m in enumerate(means, start=1)]
    return MetricsSeries(run_id=run_id, user_count=100, records=records)


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))


class ConfigFileTests(SimpleTestCase):
    """Tests for key = value settings files"""

    def test_read_and_cast(self):
        text = (
            '# sweep at desk scale\n'
            'er_n = 5000\n'
            'ER_P=0.0005\n'
            'bots = 56, 112,224,560  # four cells\n'
            'strategies = rp,li\n'
            'fixed-graph = true\n'
            '\n'
            'shift_dist = synthetic\n'
        )
        values = cast_config(read_config_file(io.StringIO(text)))
        self.assertEqual(values['er_n'], 5000)
        self.assertAlmostEqual(values['er_p'], 0.0005)
        self.assertEqual(values['bots'], [56, 112, 224, 560])
        self.assertEqual(values['strategies'], ['rp', 'li'])
        self.assertIs(values['fixed_graph'], True)
        self.assertEqual(values['shift_dist'], 'synthetic')

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            read_config_file(io.StringIO('kiter = 32\n'))

    def test_missing_equals(self):
        with self.assertRaises(ConfigError):
            read_config_file(io.StringIO('weeks 8\n'))

    def test_bad_value(self):
        with self.assertRaises(ConfigError):
            cast_config({'weeks': 'eight'})

    def test_resolution_order(self):
        """Defaults, then the file, then CLI flags"""
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'sweep.cfg')
            Path(path).write_text('weeks = 6\nseed = 11\nruns = 3\n')
            resolved = resolve({'weeks': 4, 'seed': None, 'strategy': ['li'], 'verbosity': 1}, path)
        self.assertEqual(resolved['weeks'], 4)
        self.assertEqual(resolved['seed'], 11)
        self.assertEqual(resolved['runs'], 3)
        self.assertEqual(resolved['strategies'], ['li'])
        self.assertEqual(resolved['hops_per_week'], 4)
        self.assertNotIn('verbosity', resolved)

    def test_resolved_snapshot_reads_back(self):
        spec = small_spec()
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'resolved_config.txt')
            with open(path, 'w') as f:
                write_resolved(spec.settings(), f)
            lines = Path(path).read_text().splitlines()
            values = load_config(path)
        self.assertEqual(lines, sorted(lines))
        self.assertEqual(values['bots'], [10, 30])
        self.assertEqual(values['er_n'], 300)
        self.assertEqual(values['weeks'], 3)
        self.assertAlmostEqual(values['amplifier_fraction'], 0.053)
        self.assertNotIn('graph', values)


class FormTests(SimpleTestCase):
    """Tests for validation of resolved settings"""

    def data(self, **overrides):
        resolved = resolve({})
        resolved.update(bots=[56, 112])
        resolved.update(overrides)
        return form_data(resolved)

    def test_defaults_are_valid(self):
        form = ExperimentSpecForm(data=self.data())
        self.assertTrue(form.is_valid(), form.errors)
        spec = ExperimentSpec.from_form(form.cleaned_data)
        self.assertEqual(spec.bots, (56, 112))
        self.assertEqual(spec.strategies, ('rp', 'li'))
        self.assertEqual(spec.fractions, (0.053, 0.014, 0.933))
        self.assertEqual(spec.runs, 5)
        self.assertIsNone(spec.graph)

    def test_zero_bots_rejected(self):
        """The baseline is implicit, so 0 is not a cell"""
        form = ExperimentSpecForm(data=self.data(bots=[0, 56]))
        self.assertFalse(form.is_valid())
        self.assertIn('bots', form.errors)

    def test_bots_deduplicated_and_sorted(self):
        form = ExperimentSpecForm(data=self.data(bots='224, 56,224'))
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['bots'], [56, 224])

    def test_unknown_strategy(self):
        form = ExperimentSpecForm(data=self.data(strategies=['rp', 'hub']))
        self.assertFalse(form.is_valid())
        self.assertIn('strategies', form.errors)

    def test_runs_at_least_one(self):
        form = ExperimentSpecForm(data=self.data(runs=0))
        self.assertFalse(form.is_valid())
        self.assertIn('runs', form.errors)

    def test_fractions_must_sum_to_one(self):
        form = SimulationForm(data=self.data(amplifier_fraction=0.2))
        self.assertFalse(form.is_valid())
        self.assertIn('copycat_fraction', form.errors)

    def test_graph_source_required(self):
        form = SimulationForm(data=self.data(er_n=None))
        self.assertFalse(form.is_valid())
        self.assertIn('er_n', form.errors)

    def test_missing_files(self):
        form = SimulationForm(data=self.data(shift_dist='/nonexistent/shifts.csv', transitions='/nonexistent/m.csv'))
        self.assertFalse(form.is_valid())
        self.assertIn('shift_dist', form.errors)
        self.assertIn('transitions', form.errors)

    def test_initial_toxicity_range(self):
        form = SimulationForm(data=self.data(initial_toxicity_lo=0.9, initial_toxicity_hi=0.5))
        self.assertFalse(form.is_valid())

    def test_payload_round_trip(self):
        spec = small_spec(strategies=['li'])
        self.assertEqual(ExperimentSpec.from_dict(spec.to_dict()), spec)


class HarnessTests(SimpleTestCase):
    """Tests for seeds, cells and the reduction table"""

    def test_table_shape(self):
        spec = small_spec()
        with tempfile.TemporaryDirectory() as d:
            result = run_experiment(spec, d)
        self.assertEqual(len(result.table.rows), 4)
        self.assertEqual([(r.strategy, r.n_bots) for r in result.table.rows], spec.cells)
        self.assertTrue(all(r.nodes == 300 for r in result.table.rows))
        # baseline plus four cells per run
        self.assertEqual(len(result.series), 10)

    def test_mean_of_per_seed_reductions(self):
        spec = small_spec()
        seeds = [execute_seed(spec, k) for k in range(spec.runs)]
        table = ReductionTable.from_seeds(spec, seeds)
        for row in table.rows:
            values = [c['reduction'] for s in seeds for c in s['cells']
                      if c['strategy'] == row.strategy and c['n_bots'] == row.n_bots]
            self.assertEqual(len(values), 2)
            self.assertAlmostEqual(row.mean, np.mean(values), places=12)
            self.assertAlmostEqual(row.std, np.std(values, ddof=1), places=12)

    def test_single_run_has_zero_std(self):
        spec = small_spec(runs=1, bots=(20,), strategies=('li',))
        table = ReductionTable.from_seeds(spec, [execute_seed(spec, 0)])
        self.assertEqual(table.cell('li', 20).std, 0.0)

    def test_extinct_baseline_gives_nan_reduction(self):
        """A baseline that ends at zero toxicity yields NaN instead of aborting the sweep"""
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'extinct.csv')
            with open(path, 'w') as f:
                f.write('category,input_lo,input_hi,shift_lo,shift_hi,density\n')
                for label in ('amplifier', 'attenuator', 'copycat'):
                    f.write(f'{label},0,1,-1,-1,1\n')
            spec = small_spec(shift_dist=path, bots=(10,), strategies=('li',))
            seeds = [execute_seed(spec, k) for k in range(spec.runs)]
            run_experiment(spec, os.path.join(d, 'out'))
        for seed in seeds:
            self.assertTrue(np.isnan(seed['cells'][0]['reduction']))
        row = ReductionTable.from_seeds(spec, seeds).cell('li', 10)
        self.assertTrue(np.isnan(row.mean))
        self.assertTrue(np.isnan(row.std))

    def test_table_skips_undefined_reductions(self):
        spec = small_spec(bots=(10,), strategies=('rp',), runs=3)
        seeds = [
            {'nodes': 300, 'edges': 900, 'cells': [{'strategy': 'rp', 'n_bots': 10, 'reduction': value}]}
            for value in (10.0, float('nan'), 14.0)
        ]
        row = ReductionTable.from_seeds(spec, seeds).cell('rp', 10)
        self.assertEqual(row.mean, 12.0)
        self.assertAlmostEqual(row.std, np.std([10.0, 14.0], ddof=1))

    def test_baseline_shared_across_cells(self):
        """Adding cells never changes a seed's baseline"""
        one = execute_seed(small_spec(bots=(10,), strategies=('rp',)), 0)
        many = execute_seed(small_spec(bots=(10, 30)), 0)
        self.assertEqual(one['series'][0], many['series'][0])
        self.assertEqual(one['cells'][0]['reduction'], many['cells'][0]['reduction'])

    def test_fixed_graph(self):
        spec = small_spec(fixed_graph=True)
        self.assertEqual(execute_seed(spec, 0)['edges'], execute_seed(spec, 1)['edges'])

    def test_graph_file_source(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'graph.edgelist')
            with open(path, 'w') as f:
                save_edge_list(generate_er(200, 0.03, 5), f)
            result = execute_seed(small_spec(graph=path, bots=(5,), strategies=('li',)), 0)
        self.assertEqual(result['nodes'], 200)

    def test_outputs_written(self):
        with tempfile.TemporaryDirectory() as d:
            run_experiment(small_spec(), d)
            names = set(os.listdir(d))
            table = read_rows(os.path.join(d, 'reduction_table.csv'))
            weekly = read_rows(os.path.join(d, 'reduction_by_week.csv'))
            manifest = read_rows(os.path.join(d, 'deployment_li_30_run1.csv'))
        for name in (
            'reduction_table.csv', 'reduction_by_week.csv', 'metrics_run0.csv', 'metrics_run1.csv',
            'deployment_rp_10_run0.csv', 'deployment_li_30_run1.csv', 'resolved_config.txt', 'plot.svg',
        ):
            self.assertIn(name, names)
        self.assertEqual(list(table[0]), ['nodes', 'edges', 'n_bots', 'strategy', 'mean_reduction', 'std_reduction'])
        self.assertEqual(len(weekly), 4 * 3)
        self.assertEqual(len(manifest), 30)
        self.assertEqual({row['strategy'] for row in manifest}, {'li'})

    def test_determinism(self):
        """Same master seed gives byte-identical files"""
        spec = small_spec(runs=1)
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            run_experiment(spec, a)
            run_experiment(spec, b)
            for name in sorted(os.listdir(a)):
                self.assertEqual(Path(a, name).read_bytes(), Path(b, name).read_bytes(), name)

    def test_toxicity_in_range(self):
        with tempfile.TemporaryDirectory() as d:
            result = run_experiment(small_spec(), d)
        for series in result.series:
            self.assertTrue(((series.means >= 0) & (series.means <= 1)).all())


class DeskScaleSweepTests(SimpleTestCase):
    """ER sweep at 5000 nodes, p=0.0005, synthetic shifts, five seeds"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spec = ExperimentSpec(er_n=5000, er_p=0.0005, bots=(56, 112, 224, 560), runs=5, seed=42)
        cls.out_dir = tempfile.TemporaryDirectory()
        start = time.time()
        cls.result = run_experiment(cls.spec, cls.out_dir.name)
        cls.elapsed = time.time() - start

    @classmethod
    def tearDownClass(cls):
        cls.out_dir.cleanup()
        super().tearDownClass()

    def test_eight_cells(self):
        self.assertEqual(len(self.result.table.rows), 8)
        self.assertLess(self.elapsed, 300)

    def test_reductions_positive_and_increasing(self):
        for strategy in ('rp', 'li'):
            means = [self.result.table.cell(strategy, n).mean for n in self.spec.bots]
            self.assertTrue(all(m > 0 for m in means), means)
            self.assertTrue(all(a < b for a, b in zip(means, means[1:])), means)

    def test_lowest_indegree_beats_random(self):
        table = self.result.table
        for n in self.spec.bots:
            self.assertGreaterEqual(table.cell('li', n).mean, table.cell('rp', n).mean - 1.0)
        self.assertGreater(table.cell('li', 560).mean, table.cell('rp', 560).mean)


class PlotTests(SimpleTestCase):
    """Tests for mean-toxicity charts"""

    def test_single_series(self):
        fig = build_figure([series_of('run0', [0.1, 0.3, 0.2, 0.5, 0.4, 0.6, 0.35, 0.7])])
        lines = fig.axes[0].get_lines()
        self.assertEqual(len(lines), 1)
        self.assertEqual(len(lines[0].get_xydata()), 8)
        self.assertEqual(lines[0].get_gid(), 'toxicity-series-0')

    def test_two_series_two_legend_entries(self):
        fig = build_figure([series_of('run0-baseline', [0.2, 0.4]), series_of('run0-li-56', [0.2, 0.3])])
        self.assertEqual(len(fig.axes[0].get_lines()), 2)
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        self.assertEqual(labels, ['run0-baseline', 'run0-li-56'])

    def test_svg_has_one_group_per_series(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'plot.svg')
            emit_plot([series_of('a', [0.1, 0.5, 0.3]), series_of('b', [0.2, 0.1, 0.4])], path)
            svg = Path(path).read_text()
        self.assertEqual(len(re.findall(r'id="toxicity-series-\d+"', svg)), 2)

    def test_byte_stable(self):
        series = [series_of('run0', [0.1, 0.3, 0.2, 0.5])]
        with tempfile.TemporaryDirectory() as d:
            emit_plot(series, os.path.join(d, 'one.svg'))
            emit_plot(series, os.path.join(d, 'two.svg'))
            self.assertEqual(Path(d, 'one.svg').read_bytes(), Path(d, 'two.svg').read_bytes())

    def test_empty_series(self):
        with self.assertRaises(PlotError):
            build_figure([])


class SimulateCommandTests(SimpleTestCase):
    """Tests for the simulate command"""

    def test_baseline_only(self):
        out = io.StringIO()
        with tempfile.TemporaryDirectory() as d:
            call_command('simulate', '--er-n', '300', '--er-p', '0.02', '--weeks', '3', '--out-dir', d, stdout=out)
            with open(os.path.join(d, 'metrics_run0.csv'), newline='') as f:
                series = read_metrics_csv(f)
            self.assertTrue(os.path.exists(os.path.join(d, 'resolved_config.txt')))
        self.assertEqual([s.run_id for s in series], ['run0-baseline'])
        self.assertEqual(series[0].weeks, [1, 2, 3])
        self.assertIn('Metrics written', out.getvalue())

    def test_with_bots(self):
        with tempfile.TemporaryDirectory() as d:
            call_command(
                'simulate', '--er-n', '300', '--er-p', '0.02', '--weeks', '2',
                '--bots', '15', '--strategy', 'li', '--out-dir', d, stdout=io.StringIO(),
            )
            with open(os.path.join(d, 'metrics_run0.csv'), newline='') as f:
                series = read_metrics_csv(f)
            self.assertTrue(os.path.exists(os.path.join(d, 'deployment_li_15_run0.csv')))
        self.assertEqual([s.run_id for s in series], ['run0-baseline', 'run0-li-15'])

    def test_zero_bots_rejected(self):
        with tempfile.TemporaryDirectory() as d:
            with self.assertRaises(CommandError):
                call_command('simulate', '--er-n', '100', '--bots', '0', '--out-dir', d, stdout=io.StringIO())

    def test_bad_config(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'bad.cfg')
            Path(path).write_text('colour = blue\n')
            with self.assertRaises(CommandError):
                call_command('simulate', '--config', path, '--out-dir', d, stdout=io.StringIO())

    def test_plot_command(self):
        with tempfile.TemporaryDirectory() as d:
            call_command(
                'simulate', '--er-n', '300', '--er-p', '0.02', '--weeks', '2',
                '--bots', '15', '--out-dir', d, stdout=io.StringIO(),
            )
            out = io.StringIO()
            call_command('plot', os.path.join(d, 'metrics_run0.csv'), '--run-id', 'run0-baseline', stdout=out)
            self.assertTrue(os.path.exists(os.path.join(d, 'plot.svg')))
        self.assertIn('Plotted 1 series', out.getvalue())

    def test_analyze_then_simulate(self):
        """Shift distribution exported by analyze drives a simulation on the same graph"""
        start = time.time()
        with tempfile.TemporaryDirectory() as d:
            graph_path, posts_path = write_post_fixture(d)
            analysis = os.path.join(d, 'analysis')
            call_command('analyze', '--posts', posts_path, '--graph', graph_path, '--out-dir', analysis,
                         stdout=io.StringIO())
            simulation = os.path.join(d, 'simulation')
            call_command(
                'simulate', '--graph', graph_path, '--weeks', '4', '--bots', '20', '--strategy', 'rp',
                '--shift-dist', os.path.join(analysis, 'shift_distribution.csv'),
                '--transitions', os.path.join(analysis, 'transitions.csv'),
                '--out-dir', simulation, stdout=io.StringIO(),
            )
            with open(os.path.join(simulation, 'metrics_run0.csv'), newline='') as f:
                series = read_metrics_csv(f)
        self.assertEqual(len(series), 2)
        self.assertEqual(len(series[0]), 4)
        self.assertLess(time.time() - start, 30)


class ExperimentRecordTests(TestCase):
    """Tests for storing sweeps in the database"""

    def test_record_table(self):
        spec = small_spec(runs=1)
        table = ReductionTable.from_seeds(spec, [execute_seed(spec, 0)])
        experiment = Experiment.objects.create(
            name='small', master_seed=7, runs=1, config='{"weeks": 3}', output_dir='/tmp/small',
        )
        experiment.record_table(table)
        experiment.refresh_from_db()
        self.assertIsNotNone(experiment.completed_at)
        self.assertEqual(experiment.get_config(), {'weeks': 3})
        self.assertEqual(experiment.results.count(), 4)
        row = experiment.results.get(strategy='li', n_bots=30)
        self.assertAlmostEqual(row.mean_reduction, table.cell('li', 30).mean)

    @override_settings(CELERY_TASK_ALWAYS_EAGER=True)
    def test_experiment_command_records(self):
        out = io.StringIO()
        with tempfile.TemporaryDirectory() as d:
            call_command(
                'experiment', '--name', 'tiny', '--er-n', '200', '--er-p', '0.03', '--weeks', '2',
                '--bots', '5,10', '--strategy', 'rp', '--runs', '2', '--out-dir', d, stdout=out,
            )
            self.assertTrue(os.path.exists(os.path.join(d, 'reduction_table.csv')))
        experiment = Experiment.objects.get(name='tiny')
        self.assertEqual(experiment.runs, 2)
        self.assertEqual(experiment.get_config()['bots'], [5, 10])
        self.assertEqual(ReductionResult.objects.filter(experiment=experiment).count(), 2)
        self.assertIn('Experiment written', out.getvalue())

    def test_experiment_command_rejects_zero_bots(self):
        with tempfile.TemporaryDirectory() as d:
            with self.assertRaises(CommandError):
                call_command('experiment', '--bots', '0', '--out-dir', d, stdout=io.StringIO())
        self.assertEqual(Experiment.objects.count(), 0)

"""
Baseline vs intervention sweeps over several seeds.

Every seed runs the baseline and each (strategy, bot count) cell on the
same graph, category profile and random lineage. Percentage reductions are
computed per seed on the final week and then averaged.
"""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
import csv
import io
import logging
import math

import numpy as np
from celery import group

from behavior.categories import assign_categories, load_transition_matrix
from behavior.shifts import load_shift_distribution, synthetic_shift_distribution
from diffusion.engine import MetricsSeries, SimulationConfig, WeekRecord, run, write_metrics_csv
from diffusion.streams import RngStreams
from graphs.digraph import generate_er
from graphs.edgelist import load_edge_list
from intervention.bots import DeploymentError, deploy_bots, percentage_reduction

from .config import write_resolved
from .forms import SYNTHETIC
from .plotting import emit_plot

logger = logging.getLogger(__name__)

TABLE_HEADER = ('nodes', 'edges', 'n_bots', 'strategy', 'mean_reduction', 'std_reduction')
WEEKLY_HEADER = ('strategy', 'n_bots', 'week', 'mean_reduction', 'std_reduction')


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = ''
    graph: str = None
    er_n: int = 5000
    er_p: float = 0.0005
    fractions: tuple = (0.053, 0.014, 0.933)
    changing_fraction: float = 0.47
    weeks: int = 8
    hops_per_week: int = 4
    input_bins: int = 20
    seed_fraction: float = 0.01
    initial_toxicity: tuple = (0.5, 1.0)
    category_cadence: str = 'hop'
    zero_clamped_active: bool = True
    shift_dist: str = SYNTHETIC
    transitions: str = None
    bots: tuple = ()
    strategies: tuple = ('rp', 'li')
    runs: int = 5
    seed: int = 42
    fixed_graph: bool = False

    def __post_init__(self):
        for name in ('fractions', 'initial_toxicity', 'bots', 'strategies'):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def from_form(cls, cleaned_data):
        data = dict(cleaned_data)
        data['fractions'] = (
            data.pop('amplifier_fraction'), data.pop('attenuator_fraction'), data.pop('copycat_fraction'),
        )
        data['initial_toxicity'] = (data.pop('initial_toxicity_lo'), data.pop('initial_toxicity_hi'))
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known and value is not None})

    def to_dict(self):
        """JSON-serialisable form, used as the Celery task payload"""
        return {key: list(value) if isinstance(value, tuple) else value for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def simulation_config(self, run_index=0):
        return SimulationConfig.for_weeks(
            self.weeks,
            hops_per_week=self.hops_per_week,
            seed_fraction=self.seed_fraction,
            initial_toxicity=self.initial_toxicity,
            seed=self.seed,
            run_index=run_index,
            category_cadence=self.category_cadence,
            zero_clamped_active=self.zero_clamped_active,
        )

    @property
    def cells(self):
        return [(strategy, n_bots) for strategy in self.strategies for n_bots in self.bots]

    def settings(self):
        """Flat key/value view written to resolved_config.txt"""
        values = {key: value for key, value in asdict(self).items() if key not in ('fractions', 'initial_toxicity')}
        values.update(
            amplifier_fraction=self.fractions[0],
            attenuator_fraction=self.fractions[1],
            copycat_fraction=self.fractions[2],
            initial_toxicity_lo=self.initial_toxicity[0],
            initial_toxicity_hi=self.initial_toxicity[1],
        )
        return values


def cell_id(run_index, strategy=None, n_bots=None):
    if strategy is None:
        return f'run{run_index}-baseline'
    return f'run{run_index}-{strategy}-{n_bots}'


def load_graph(spec, run_index):
    """Edge-list graph, or an ER graph from the run's graph stream (run 0's when fixed)"""
    if spec.graph:
        with open(spec.graph, 'rb') as f:
            return load_edge_list(f)
    graph_run = 0 if spec.fixed_graph else run_index
    return generate_er(spec.er_n, spec.er_p, RngStreams(spec.seed, graph_run).graph)


def load_model(spec):
    if spec.shift_dist == SYNTHETIC:
        dists = synthetic_shift_distribution(bins=spec.input_bins)
    else:
        with open(spec.shift_dist, 'rb') as f:
            dists = load_shift_distribution(f)
    if spec.transitions:
        with open(spec.transitions, 'rb') as f:
            m = load_transition_matrix(f)
    else:
        m = load_transition_matrix()
    return dists, m


def _weekly_reductions(baseline, series):
    values = []
    for base, cell in zip(baseline.totals, series.totals):
        try:
            values.append(float(percentage_reduction(base, cell)))
        except DeploymentError:
            values.append(math.nan)
    return values


def _final_reduction(baseline, series):
    try:
        return float(percentage_reduction(baseline.final_total, series.final_total))
    except DeploymentError:
        logger.warning(f'{series.run_id}: baseline final toxicity is zero, reduction undefined')
        return math.nan


def series_to_rows(series):
    return [[r.week, r.total_toxicity, r.mean_toxicity, r.active_nodes] for r in series.records]


def series_from_rows(run_id, user_count, rows):
    records = [WeekRecord(int(w), float(total), float(mean), int(active)) for w, total, mean, active in rows]
    return MetricsSeries(run_id=run_id, user_count=user_count, records=records)


def execute_seed(spec, run_index):
    """
    Baseline plus every cell for one seed.

    Returns a JSON-serialisable dict so the result can travel through the
    Celery result backend.
    """
    streams = RngStreams(spec.seed, run_index)
    g = load_graph(spec, run_index)
    profile = assign_categories(g, spec.fractions, spec.changing_fraction, streams.categories)
    dists, m = load_model(spec)
    config = spec.simulation_config(run_index)

    baseline = run(g, profile, dists, m, config, run_id=cell_id(run_index))
    series = [baseline]
    cells = []
    for strategy, n_bots in spec.cells:
        deployment = deploy_bots(g, n_bots, strategy, seed=streams.bot_seed)
        cell_series = run(deployment.graph, profile, dists, m, config, run_id=cell_id(run_index, strategy, n_bots))
        series.append(cell_series)
        manifest = io.StringIO()
        deployment.write_manifest(manifest)
        cells.append({
            'strategy': strategy,
            'n_bots': n_bots,
            'reduction': _final_reduction(baseline, cell_series),
            'weekly': _weekly_reductions(baseline, cell_series),
            'manifest': manifest.getvalue(),
        })
        logger.debug(f'{cell_series.run_id}: reduction {cells[-1]["reduction"]:.4f}%')

    return {
        'run_index': run_index,
        'nodes': int(g.node_count),
        'edges': g.edge_count,
        'user_count': int(g.user_count),
        'series': [{'run_id': s.run_id, 'rows': series_to_rows(s)} for s in series],
        'cells': cells,
    }


@dataclass(frozen=True)
class ReductionRow:
    nodes: int
    edges: int
    n_bots: int
    strategy: str
    mean: float
    std: float


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        return math.nan, math.nan
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), std


@dataclass
class ReductionTable:
    """One row per cell; the mean is over per-seed reductions, std uses ddof=1"""
    rows: list = field(default_factory=list)

    @classmethod
    def from_seeds(cls, spec, seeds):
        nodes = seeds[0]['nodes']
        edges = round(float(np.mean([s['edges'] for s in seeds])))
        rows = []
        for strategy, n_bots in spec.cells:
            values = [_cell(s, strategy, n_bots)['reduction'] for s in seeds]
            mean, std = _mean_std(values)
            rows.append(ReductionRow(nodes, edges, n_bots, strategy, mean, std))
        return cls(rows=rows)

    def cell(self, strategy, n_bots):
        for row in self.rows:
            if row.strategy == strategy and row.n_bots == n_bots:
                return row
        raise KeyError((strategy, n_bots))

    def write(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(TABLE_HEADER)
        for r in self.rows:
            writer.writerow([r.nodes, r.edges, r.n_bots, r.strategy, f'{r.mean:.6f}', f'{r.std:.6f}'])


def _cell(seed_result, strategy, n_bots):
    for cell in seed_result['cells']:
        if cell['strategy'] == strategy and cell['n_bots'] == n_bots:
            return cell
    raise KeyError((strategy, n_bots))


def weekly_rows(spec, seeds):
    rows = []
    for strategy, n_bots in spec.cells:
        per_seed = np.array([_cell(s, strategy, n_bots)['weekly'] for s in seeds], dtype=float)
        for week_index in range(per_seed.shape[1]):
            values = per_seed[:, week_index]
            values = values[~np.isnan(values)]
            if values.size == 0:
                continue
            mean, std = _mean_std(values)
            rows.append((strategy, n_bots, week_index + 1, mean, std))
    return rows


@dataclass
class ExperimentResult:
    table: ReductionTable
    series: list
    weekly: list


def collect_seeds(spec):
    """Fan seeds out as Celery tasks and gather their results in run order"""
    from .tasks import run_seed

    payload = spec.to_dict()
    job = group([run_seed.s(payload, k) for k in range(spec.runs)])
    results = job.apply_async().get(disable_sync_subtasks=False)
    return sorted((r['result'] for r in results), key=lambda r: r['run_index'])


def run_experiment(spec, out_dir):
    """
    Execute a sweep and write every output into ``out_dir``.

    The caller is the single writer: seeds only return data.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f'Experiment {spec.name or "unnamed"}: {spec.runs} runs, cells {spec.cells}')

    seeds = collect_seeds(spec)
    table = ReductionTable.from_seeds(spec, seeds)
    weekly = weekly_rows(spec, seeds)
    series = {}
    for seed in seeds:
        k = seed['run_index']
        series[k] = [series_from_rows(s['run_id'], seed['user_count'], s['rows']) for s in seed['series']]
        with open(out_dir / f'metrics_run{k}.csv', 'w', newline='', encoding='utf-8') as f:
            write_metrics_csv(series[k], f)
        for cell in seed['cells']:
            path = out_dir / f'deployment_{cell["strategy"]}_{cell["n_bots"]}_run{k}.csv'
            path.write_text(cell['manifest'], encoding='utf-8')

    with open(out_dir / 'reduction_table.csv', 'w', newline='', encoding='utf-8') as f:
        table.write(f)
    with open(out_dir / 'reduction_by_week.csv', 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(WEEKLY_HEADER)
        for strategy, n_bots, week, mean, std in weekly:
            writer.writerow([strategy, n_bots, week, f'{mean:.6f}', f'{std:.6f}'])
    with open(out_dir / 'resolved_config.txt', 'w', encoding='utf-8') as f:
        write_resolved(spec.settings(), f)

    emit_plot(series[0], out_dir / 'plot.svg')

    logger.info(f'Experiment written to {out_dir}')
    return ExperimentResult(table=table, series=[s for k in sorted(series) for s in series[k]], weekly=weekly)

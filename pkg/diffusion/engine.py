"""
Hop-by-hop toxicity propagation.

Each hop reads the pre-hop snapshot: every node with at least one active
in-neighbour takes the average toxicity of its active in-neighbours, adds
a shift sampled for its category and that input, and is clamped to [0, 1].
All updates are committed together, so results never depend on the order
nodes are visited.
"""
from dataclasses import dataclass, field, replace
import csv
import logging
import math

import numpy as np

from .streams import RngStreams

logger = logging.getLogger(__name__)

METRICS_HEADER = ('run_id', 'week', 'total_toxicity', 'mean_toxicity', 'active_nodes')
CADENCES = ('hop', 'week')


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    kiter: int = 32
    hops_per_week: int = 4
    seed_fraction: float = 0.01
    seed_nodes: tuple = None
    initial_toxicity: tuple = (0.5, 1.0)
    seed: int = 42
    run_index: int = 0
    category_cadence: str = 'hop'
    zero_clamped_active: bool = True

    def __post_init__(self):
        if self.kiter < 1:
            raise SimulationError(f'kiter must be at least 1, got {self.kiter}')
        if self.hops_per_week < 1:
            raise SimulationError(f'hops_per_week must be at least 1, got {self.hops_per_week}')
        lo, hi = self.initial_toxicity
        if not 0.0 < lo <= hi <= 1.0:
            raise SimulationError(f'initial toxicity range [{lo}, {hi}] must lie in (0, 1]')
        if self.seed_nodes is None and not 0.0 < self.seed_fraction <= 1.0:
            raise SimulationError(f'seed fraction {self.seed_fraction} outside (0, 1]')
        if self.category_cadence not in CADENCES:
            raise SimulationError(f'category cadence must be one of {CADENCES}')
        if self.seed_nodes is not None:
            object.__setattr__(self, 'seed_nodes', tuple(int(v) for v in self.seed_nodes))

    @classmethod
    def for_weeks(cls, weeks, hops_per_week=4, **kwargs):
        if weeks < 1:
            raise SimulationError(f'weeks must be at least 1, got {weeks}')
        return cls(kiter=weeks * hops_per_week, hops_per_week=hops_per_week, **kwargs)

    @property
    def weeks(self):
        return math.ceil(self.kiter / self.hops_per_week)


@dataclass(frozen=True, eq=False)
class SimulationState:
    toxicity: np.ndarray
    active: np.ndarray
    category: np.ndarray
    changing: np.ndarray
    is_bot: np.ndarray
    hop: int = 0

    @property
    def user_count(self):
        return int(np.count_nonzero(~self.is_bot))

    @classmethod
    def initial(cls, g, profile):
        """All users inactive at 0; bots active at 0 and exempt from transitions"""
        if profile.node_count == g.user_count and g.bot_count:
            profile = profile.with_bots(g.bot_count)
        if profile.node_count != g.node_count:
            raise SimulationError(
                f'category profile covers {profile.node_count} nodes, graph has {g.node_count}'
            )
        is_bot = np.arange(g.node_count) >= g.user_count
        return cls(
            toxicity=np.zeros(g.node_count),
            active=is_bot.copy(),
            category=profile.category.astype(np.int8, copy=True),
            changing=profile.changing & ~is_bot,
            is_bot=is_bot,
        )


@dataclass(frozen=True)
class WeekRecord:
    week: int
    total_toxicity: float
    mean_toxicity: float
    active_nodes: int


@dataclass
class MetricsSeries:
    """Weekly totals over users; bots never count"""
    run_id: str
    user_count: int
    records: list = field(default_factory=list)

    def record(self, week, state):
        users = ~state.is_bot
        total = float(state.toxicity[users].sum())
        self.records.append(WeekRecord(
            week=week,
            total_toxicity=total,
            mean_toxicity=total / self.user_count if self.user_count else 0.0,
            active_nodes=int(np.count_nonzero(state.active & users)),
        ))

    @property
    def weeks(self):
        return [r.week for r in self.records]

    @property
    def totals(self):
        return np.array([r.total_toxicity for r in self.records])

    @property
    def means(self):
        return np.array([r.mean_toxicity for r in self.records])

    @property
    def final_total(self):
        if not self.records:
            raise SimulationError(f'series {self.run_id} has no records')
        return self.records[-1].total_toxicity

    def __len__(self):
        return len(self.records)


def seed_toxicity(state, g, config, rng):
    """Give the seed users a starting toxicity drawn from the configured range"""
    if config.seed_nodes is not None:
        seeds = np.unique(np.asarray(config.seed_nodes, dtype=np.int64))
        if seeds.size and (seeds.min() < 0 or seeds.max() >= g.user_count):
            raise SimulationError(f'seed node outside [0, {g.user_count})')
    else:
        count = int(np.floor(g.user_count * config.seed_fraction + 0.5))
        seeds = np.sort(rng.permutation(g.user_count)[:count])
    if seeds.size == 0:
        raise SimulationError('seed set is empty')

    lo, hi = config.initial_toxicity
    toxicity = state.toxicity.copy()
    active = state.active.copy()
    toxicity[seeds] = rng.uniform(lo, hi, seeds.size)
    active[seeds] = True
    logger.debug(f'Seeded {seeds.size} users with toxicity in [{lo}, {hi}]')
    return replace(state, toxicity=toxicity, active=active)


def avg_incoming_toxicity(v, state, g):
    """Mean toxicity over active in-neighbours of ``v``; None when there are none"""
    neighbors = g.in_neighbors(v)
    neighbors = neighbors[state.active[neighbors]]
    if neighbors.size == 0:
        return None
    return float(state.toxicity[neighbors].mean())


def incoming_averages(state, g):
    """
    Vectorised avg_incoming_toxicity for every node.

    Returns (averages, has_input); averages are NaN where has_input is False.
    """
    src, dst = g.edge_arrays
    live = state.active[src]
    counts = np.bincount(dst[live], minlength=g.node_count)
    sums = np.bincount(dst[live], weights=state.toxicity[src[live]], minlength=g.node_count)
    has_input = counts > 0
    averages = np.full(g.node_count, np.nan)
    averages[has_input] = np.clip(sums[has_input] / counts[has_input], 0.0, 1.0)
    return averages, has_input


def step_hop(state, g, dists, m, draws, update_categories=True, zero_clamped_active=True):
    """
    Advance one hop from the pre-hop snapshot.

    ``draws`` is an (node_count, 3) array of uniforms; row v is used only
    by node v. Nodes with no active in-neighbour keep their toxicity.
    """
    averages, has_input = incoming_averages(state, g)
    nodes = np.flatnonzero(has_input & ~state.is_bot)

    toxicity = state.toxicity.copy()
    active = state.active.copy()
    category = state.category.copy()
    if nodes.size:
        shifts = dists.sample_many(state.category[nodes], averages[nodes], draws[nodes, 0], draws[nodes, 1])
        updated = np.clip(averages[nodes] + shifts, 0.0, 1.0)
        toxicity[nodes] = updated
        active[nodes] = True if zero_clamped_active else updated > 0.0
        if update_categories:
            category[nodes] = m.step_many(state.category[nodes], state.changing[nodes], draws[nodes, 2])

    return replace(state, toxicity=toxicity, active=active, category=category, hop=state.hop + 1)


def apply_weekly_transitions(state, m, draws):
    """Week cadence: every active changing user draws a transition"""
    nodes = np.flatnonzero(state.active & state.changing & ~state.is_bot)
    category = state.category.copy()
    category[nodes] = m.step_many(state.category[nodes], state.changing[nodes], draws[nodes, 2])
    return replace(state, category=category)


def run(g, profile, dists, m, config, run_id=None, observer=None):
    """
    Seed toxicity, execute ``config.kiter`` hops and record every week.

    A trailing partial week is recorded as an extra row. ``observer`` is
    called with the state after every hop.
    """
    streams = RngStreams(config.seed, config.run_index)
    run_id = run_id or f'run{config.run_index}'
    state = SimulationState.initial(g, profile)
    state = seed_toxicity(state, g, config, streams.seeding)
    series = MetricsSeries(run_id=run_id, user_count=g.user_count)
    per_hop = config.category_cadence == 'hop'

    for hop in range(config.kiter):
        draws = streams.hop_draws(hop, g.node_count)
        state = step_hop(
            state, g, dists, m, draws,
            update_categories=per_hop,
            zero_clamped_active=config.zero_clamped_active,
        )
        if observer is not None:
            observer(state)
        done = hop + 1
        if done % config.hops_per_week == 0 or done == config.kiter:
            if not per_hop:
                state = apply_weekly_transitions(state, m, draws)
            series.record(math.ceil(done / config.hops_per_week), state)

    logger.info(
        f'{run_id}: {config.kiter} hops over {g.user_count} users, '
        f'final total toxicity {series.final_total:.6f}'
    )
    return series


def write_metrics_csv(series_list, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(METRICS_HEADER)
    for series in series_list:
        for r in series.records:
            writer.writerow([
                series.run_id, r.week, f'{r.total_toxicity:.6f}', f'{r.mean_toxicity:.6f}', r.active_nodes,
            ])


def read_metrics_csv(stream):
    """Read a metrics CSV back into one MetricsSeries per run_id, in file order"""
    series = {}
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or tuple(reader.fieldnames) != METRICS_HEADER:
        raise SimulationError(f'metrics CSV header must be {",".join(METRICS_HEADER)}')
    for row in reader:
        total, mean = float(row['total_toxicity']), float(row['mean_toxicity'])
        user_count = round(total / mean) if mean > 0 else 0
        item = series.setdefault(row['run_id'], MetricsSeries(run_id=row['run_id'], user_count=user_count))
        item.records.append(WeekRecord(int(row['week']), total, mean, int(row['active_nodes'])))
    return list(series.values())

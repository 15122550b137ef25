"""
Shift extraction from scored posts and export of empirical shift distributions.
"""
from dataclasses import dataclass, field
import io
import logging

import numpy as np
import pandas as pd

from behavior.categories import CATEGORY_ORDER, UserCategory
from behavior.shifts import CategoryShifts, ShiftDistribution, ShiftHistogram, save_shift_distribution
from graphs.edgelist import id_map_for

from .errors import AnalyticsError, PostFormatError

logger = logging.getLogger(__name__)

POST_COLUMNS = ('user_id', 'bucket', 'toxicity')
WEIGHTINGS = ('user', 'post')


def read_posts(source):
    """
    Load a ``user_id,bucket,toxicity`` CSV into a DataFrame.

    Toxicity must lie in [0, 1] and buckets must be non-negative integers.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    try:
        frame = pd.read_csv(source, comment='#', skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise PostFormatError('posts file is empty')
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise PostFormatError(f'could not parse posts: {e}')

    missing = [c for c in POST_COLUMNS if c not in frame.columns]
    if missing:
        raise PostFormatError(f'posts header must contain {",".join(POST_COLUMNS)}; missing {missing}')
    frame = frame[list(POST_COLUMNS)]
    try:
        frame = frame.astype({'user_id': 'int64', 'bucket': 'int64', 'toxicity': 'float64'})
    except (ValueError, TypeError) as e:
        raise PostFormatError(f'non-numeric value in posts: {e}')

    bad = frame[(frame['toxicity'] < 0) | (frame['toxicity'] > 1) | frame['toxicity'].isna()]
    if not bad.empty:
        raise PostFormatError(f'toxicity outside [0, 1] on data row {int(bad.index[0]) + 1}')
    bad = frame[frame['bucket'] < 0]
    if not bad.empty:
        raise PostFormatError(f'negative bucket on data row {int(bad.index[0]) + 1}')
    logger.info(f'Read {len(frame)} posts from {frame["user_id"].nunique()} users')
    return frame


@dataclass
class ShiftTable:
    """One row per (user, bucket) where both the user and an in-neighbour posted"""
    frame: pd.DataFrame
    unresolved_users: int = 0
    weighting: str = 'user'

    def __len__(self):
        return len(self.frame)

    def write(self, stream):
        self.frame.to_csv(stream, index=False, float_format='%.6f', lineterminator='\n')


def compute_shifts(posts, g, id_map=None, weighting='user'):
    """
    Shift = user's bucket mean toxicity minus its in-neighbours' mean.

    ``weighting='user'`` averages each in-neighbour's bucket mean;
    ``weighting='post'`` pools every in-neighbour post. Users missing from
    ``id_map`` are counted and skipped.
    """
    if weighting not in WEIGHTINGS:
        raise AnalyticsError(f'weighting must be one of {WEIGHTINGS}')
    if id_map is None:
        id_map = id_map_for(g)

    nodes = posts['user_id'].map(id_map)
    unresolved = nodes.isna() | (nodes >= g.user_count)
    unresolved_users = int(posts.loc[unresolved, 'user_id'].nunique())
    if unresolved_users:
        logger.warning(f'{unresolved_users} posting users are not in the graph and were skipped')
    frame = posts.loc[~unresolved].assign(user=nodes[~unresolved].astype('int64'))

    per_user = (
        frame.groupby(['user', 'bucket'])['toxicity']
        .agg(['sum', 'count', 'mean'])
        .reset_index()
    )
    posting = per_user['user'].unique()
    src, dst = g.edge_arrays
    edges = pd.DataFrame({'neighbor': src, 'user': dst})
    edges = edges[edges['user'].isin(posting) & edges['neighbor'].isin(posting)]

    neighbor_posts = edges.merge(per_user.rename(columns={'user': 'neighbor'}), on='neighbor')
    grouped = neighbor_posts.groupby(['user', 'bucket'])
    if weighting == 'user':
        neigh_avg = grouped['mean'].mean()
    else:
        neigh_avg = grouped['sum'].sum() / grouped['count'].sum()

    table = per_user[['user', 'bucket', 'mean']].rename(columns={'mean': 'self_avg'}).merge(
        neigh_avg.rename('neigh_avg').reset_index(), on=['user', 'bucket'], how='inner',
    )
    table['shift'] = table['self_avg'] - table['neigh_avg']
    external = frame[['user', 'user_id']].drop_duplicates('user')
    table = table.merge(external, on='user').sort_values(['user', 'bucket'], kind='stable')
    table = table[['user_id', 'user', 'bucket', 'self_avg', 'neigh_avg', 'shift']].reset_index(drop=True)
    logger.info(f'Computed {len(table)} shift samples for {table["user"].nunique()} users')
    return ShiftTable(frame=table, unresolved_users=unresolved_users, weighting=weighting)


@dataclass
class ExportedDistribution:
    distribution: ShiftDistribution
    filled_bins: list = field(default_factory=list)

    def write(self, stream):
        save_shift_distribution(self.distribution, stream)


def export_shift_distribution(samples, bins=20, shift_bins=40, categories=CATEGORY_ORDER):
    """
    Histogram labelled samples into the shift-distribution format.

    ``samples`` needs ``category``, ``neigh_avg`` (the input toxicity) and
    ``shift`` columns. Input bins without samples become a point mass at 0
    and are listed in ``filled_bins``.
    """
    if bins < 1 or shift_bins < 1:
        raise AnalyticsError('bin counts must be positive')
    input_edges = np.linspace(0.0, 1.0, bins + 1)
    shift_edges = np.linspace(-1.0, 1.0, shift_bins + 1)
    empty = ShiftHistogram(np.array([0.0]), np.array([0.0]), np.array([1.0]))

    result = {}
    filled = []
    for category in categories:
        category = UserCategory(category)
        picked = samples[samples['category'] == category]
        if picked.empty:
            raise AnalyticsError(f'no shift samples for {category.label}')
        counts, _, _ = np.histogram2d(
            picked['neigh_avg'].to_numpy(), picked['shift'].to_numpy(), bins=[input_edges, shift_edges],
        )
        histograms = []
        for i, row in enumerate(counts):
            total = row.sum()
            if total == 0:
                filled.append((category, i))
                histograms.append(empty)
                continue
            keep = row > 0
            histograms.append(ShiftHistogram(shift_edges[:-1][keep], shift_edges[1:][keep], row[keep] / total))
        result[category] = CategoryShifts(input_edges, tuple(histograms))

    if filled:
        logger.warning(f'{len(filled)} empty input bins filled with a zero shift')
    return ExportedDistribution(ShiftDistribution(result), filled)

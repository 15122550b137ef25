"""
IQR categorisation of users and estimation of category transitions.
"""
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

from behavior.categories import CATEGORY_ORDER, TransitionMatrix, UserCategory

from .errors import AnalyticsError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 4
POPULATIONS = ('changing', 'all')


def user_mean_shifts(table):
    """Mean shift per user over every bucket with a sample"""
    return table.frame.groupby('user')['shift'].mean()


def iqr_bounds(values, whisker=1.5):
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    spread = q3 - q1
    return q1 - whisker * spread, q3 + whisker * spread


def iqr_categorize(mean_shifts, whisker=1.5):
    """
    Amplifiers lie above Q3 + whisker*IQR, attenuators below Q1 - whisker*IQR.

    Returns a Series of UserCategory codes aligned with ``mean_shifts``.
    """
    mean_shifts = pd.Series(mean_shifts, dtype=float)
    if len(mean_shifts) < MIN_SAMPLES:
        raise AnalyticsError(f'IQR categorisation needs at least {MIN_SAMPLES} users, got {len(mean_shifts)}')
    lower, upper = iqr_bounds(mean_shifts, whisker)
    categories = np.full(len(mean_shifts), UserCategory.COPYCAT, dtype=np.int8)
    categories[(mean_shifts > upper).to_numpy()] = UserCategory.AMPLIFIER
    categories[(mean_shifts < lower).to_numpy()] = UserCategory.ATTENUATOR
    return pd.Series(categories, index=mean_shifts.index, name='category')


@dataclass
class CategoryAssignment:
    """
    Overall category per user plus the per-bucket categories behind it.

    ``buckets`` has columns ``user, bucket, category``.
    """
    overall: pd.Series
    buckets: pd.DataFrame

    @classmethod
    def from_sequences(cls, sequences):
        """Build from user -> ordered list of categories (one per bucket)"""
        rows = [
            (user, bucket, int(category))
            for user, sequence in sequences.items()
            for bucket, category in enumerate(sequence)
        ]
        buckets = pd.DataFrame(rows, columns=['user', 'bucket', 'category'])
        overall = buckets.groupby('user')['category'].agg(lambda s: s.mode().iloc[0]).rename('category')
        return cls(overall=overall, buckets=buckets)

    def sequences(self):
        ordered = self.buckets.sort_values(['user', 'bucket'], kind='stable')
        return {user: group.to_numpy() for user, group in ordered.groupby('user')['category']}

    def pairs(self):
        """Category pairs of adjacent buckets (bucket b and b + 1) per user"""
        ordered = self.buckets.sort_values(['user', 'bucket'], kind='stable').reset_index(drop=True)
        following = ordered.groupby('user')[['bucket', 'category']].shift(-1)
        adjacent = (following['bucket'] == ordered['bucket'] + 1).to_numpy()
        return pd.DataFrame({
            'user': ordered['user'].to_numpy()[adjacent],
            'source': ordered['category'].to_numpy()[adjacent].astype(np.int64),
            'target': following['category'].to_numpy()[adjacent].astype(np.int64),
        })

    @property
    def changing(self):
        """True for users whose per-bucket category is not constant"""
        return self.buckets.groupby('user')['category'].nunique().gt(1).rename('changing')

    def counts(self):
        return {c: int((self.overall == c).sum()) for c in CATEGORY_ORDER}

    def write(self, stream):
        frame = self.overall.to_frame().join(self.changing).reset_index()
        frame['category'] = frame['category'].map(lambda c: UserCategory(int(c)).label)
        frame.to_csv(stream, index=False, lineterminator='\n')


def categorize_buckets(table, whisker=1.5):
    """
    IQR categories overall and within every bucket.

    Buckets with fewer than four samples get no per-bucket categories.
    """
    overall = iqr_categorize(user_mean_shifts(table), whisker)
    parts = []
    for bucket, group in table.frame.groupby('bucket'):
        if len(group) < MIN_SAMPLES:
            logger.warning(f'Bucket {bucket} has {len(group)} shift samples, skipped for categorisation')
            continue
        labels = iqr_categorize(group.set_index('user')['shift'], whisker)
        parts.append(pd.DataFrame({'user': labels.index, 'bucket': bucket, 'category': labels.to_numpy()}))
    buckets = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(columns=['user', 'bucket', 'category'])
    assignment = CategoryAssignment(overall=overall, buckets=buckets)
    logger.info(f'Categorised {len(overall)} users: {assignment.counts()}')
    return assignment


def label_samples(table, assignment):
    """Shift samples joined with the category their user had in that bucket"""
    return table.frame.merge(assignment.buckets, on=['user', 'bucket'], how='inner')


def category_transitions(assignment, population='changing'):
    """
    Estimate the off-diagonal transition matrix from adjacent buckets.

    Only pairs of buckets b and b + 1 count; a gap between two categorised
    buckets is not a transition. Returns (TransitionMatrix, changing
    fraction). The changing fraction is over users with at least one
    adjacent pair. ``population='changing'`` counts transitions of changing
    users only; ``'all'`` counts every such user.
    """
    if population not in POPULATIONS:
        raise AnalyticsError(f'population must be one of {POPULATIONS}')
    pairs = assignment.pairs()
    users = pairs['user'].unique()
    if users.size == 0:
        raise AnalyticsError('no user has categories in two adjacent buckets')

    changing = assignment.changing.reindex(users, fill_value=False)
    if population == 'changing':
        pairs = pairs[pairs['user'].isin(changing.index[changing.to_numpy()])]
    counts = np.zeros((3, 3))
    np.add.at(counts, (pairs['source'].to_numpy(), pairs['target'].to_numpy()), 1)

    totals = counts.sum(axis=1, keepdims=True)
    probabilities = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    np.fill_diagonal(probabilities, 0.0)
    changing_users = int(changing.sum())
    fraction = changing_users / users.size
    logger.info(f'Estimated transitions from {users.size} users, {changing_users} changing')
    return TransitionMatrix(probabilities), fraction

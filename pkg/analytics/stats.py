"""
Kruskal-Wallis dependence tests and network homophily.
"""
from dataclasses import dataclass, field
import csv
import logging

import numpy as np
import pandas as pd
from scipy.special import gammaincc
from scipy.stats import rankdata, tiecorrect

from behavior.categories import UserCategory

from .categorize import label_samples
from .errors import AnalyticsError

logger = logging.getLogger(__name__)

OBSERVATIONS = ('sample', 'user')


@dataclass(frozen=True)
class KruskalResult:
    statistic: float
    pvalue: float
    df: int


def kruskal_wallis(groups):
    """
    H statistic with mid-ranks and tie correction; p from the chi-square tail.

    When every value is identical H is 0 and p is 1.
    """
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise AnalyticsError('Kruskal-Wallis needs at least two groups')
    if any(g.size == 0 for g in groups):
        raise AnalyticsError('Kruskal-Wallis groups must be non-empty')
    values = np.concatenate(groups)
    n = values.size
    if n < 3:
        raise AnalyticsError('Kruskal-Wallis needs at least three observations')

    df = len(groups) - 1
    ranks = rankdata(values)
    ties = tiecorrect(ranks)
    if ties == 0:
        return KruskalResult(statistic=0.0, pvalue=1.0, df=df)

    bounds = np.cumsum([0] + [g.size for g in groups])
    rank_sums = sum(ranks[a:b].sum() ** 2 / (b - a) for a, b in zip(bounds[:-1], bounds[1:]))
    h = (12.0 / (n * (n + 1)) * rank_sums - 3 * (n + 1)) / ties
    h = max(h, 0.0)
    return KruskalResult(statistic=float(h), pvalue=float(gammaincc(df / 2.0, h / 2.0)), df=df)


def _grouped(frame, key, value='shift'):
    return [group[value].to_numpy() for _, group in frame.groupby(key, sort=True)]


def dependence_tests(table, assignment, bins=20, observations='sample'):
    """
    Does shift depend on the user category, the input toxicity, or both?

    Returns {name: KruskalResult or None}; a test is None when fewer than
    two groups are populated. ``observations='user'`` replaces samples by
    per-user means.
    """
    if observations not in OBSERVATIONS:
        raise AnalyticsError(f'observations must be one of {OBSERVATIONS}')
    frame = label_samples(table, assignment)
    if observations == 'user':
        frame = frame.groupby('user').agg(shift=('shift', 'mean'), neigh_avg=('neigh_avg', 'mean'))
        frame = frame.join(assignment.overall, how='inner').reset_index()
    edges = np.linspace(0.0, 1.0, bins + 1)
    frame = frame.assign(
        input_bin=np.clip(np.searchsorted(edges, frame['neigh_avg'].to_numpy(), side='right') - 1, 0, bins - 1)
    )

    results = {}
    for name, key in (
        ('category', 'category'),
        ('input_toxicity', 'input_bin'),
        ('interaction', ['category', 'input_bin']),
    ):
        groups = _grouped(frame, key)
        if len(groups) < 2 or len(frame) < 3:
            logger.warning(f'Kruskal-Wallis {name} test skipped: {len(groups)} populated groups')
            results[name] = None
            continue
        results[name] = kruskal_wallis(groups)
    return results


def has_homophily(x, expected=None, margin=0.05):
    """Within-label edge fraction clearly above its chance level (x squared by default)"""
    if expected is None:
        expected = x * x
    return x > expected + margin


@dataclass(frozen=True)
class HomophilyRow:
    label: object
    x: float
    x_squared: float
    x_all_edges: float
    node_share_squared: float
    verdict: bool


@dataclass
class HomophilyReport:
    rows: list
    pairs: pd.DataFrame
    labelled_edges: int
    excluded_edges: int
    margin: float = 0.05
    total_edges: int = field(init=False)

    def __post_init__(self):
        self.total_edges = self.labelled_edges + self.excluded_edges

    def row(self, label):
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def write(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['label', 'x', 'x_squared', 'x_all_edges', 'node_share_squared', 'homophily'])
        for r in self.rows:
            writer.writerow([
                r.label, f'{r.x:.6f}', f'{r.x_squared:.6f}', f'{r.x_all_edges:.6f}',
                f'{r.node_share_squared:.6f}', 'yes' if r.verdict else 'no',
            ])


def homophily(g, labels, margin=0.05):
    """
    Within-label edge fractions.

    ``labels`` maps node id to label (mapping or per-node sequence);
    missing or None labels leave the node unlabelled and its edges are
    excluded from the labelled denominator.
    """
    if isinstance(labels, dict):
        labels = pd.Series(labels, dtype=object)
    else:
        labels = pd.Series(list(labels), dtype=object)
    labels = labels.reindex(range(g.node_count))

    src, dst = g.edge_arrays
    src_labels = labels.to_numpy()[src]
    dst_labels = labels.to_numpy()[dst]
    labelled = pd.notna(src_labels) & pd.notna(dst_labels)
    n_labelled = int(labelled.sum())
    if n_labelled == 0:
        raise AnalyticsError('no edge has two labelled endpoints')

    edges = pd.DataFrame({'source': src_labels[labelled], 'target': dst_labels[labelled]})
    pairs = edges.value_counts().rename('fraction').reset_index()
    pairs['fraction'] = pairs['fraction'] / n_labelled
    pairs = pairs.sort_values(['source', 'target'], key=lambda s: s.astype(str), kind='stable').reset_index(drop=True)

    node_labels = labels.dropna()
    rows = []
    for label in sorted(node_labels.unique(), key=str):
        within = int(((edges['source'] == label) & (edges['target'] == label)).sum())
        x = within / n_labelled
        share = float((node_labels == label).mean())
        rows.append(HomophilyRow(
            label=label,
            x=x,
            x_squared=x * x,
            x_all_edges=within / g.edge_count,
            node_share_squared=share * share,
            verdict=has_homophily(x, x * x, margin),
        ))
    return HomophilyReport(
        rows=rows, pairs=pairs, labelled_edges=n_labelled,
        excluded_edges=g.edge_count - n_labelled, margin=margin,
    )


def changing_labels(assignment, user_count):
    """'p' for changing users, 'q' for the rest, None when never categorised"""
    labels = [None] * user_count
    for user, changing in assignment.changing.items():
        if 0 <= user < user_count:
            labels[user] = 'p' if changing else 'q'
    return labels


RANGE_QUANTITIES = ('neigh_avg', 'shift')
RANGE_COLUMNS = ('category', 'quantity', 'samples', 'min', 'q1', 'median', 'q3', 'max')


def category_ranges(table, assignment):
    """
    Min, quartiles and max of input toxicity and shift per category.

    Samples are labelled with the category their user had in that bucket.
    One row per (category, quantity); categories without samples are left
    out.
    """
    frame = label_samples(table, assignment)
    rows = []
    for category, group in frame.groupby('category', sort=True):
        for quantity in RANGE_QUANTITIES:
            values = group[quantity].to_numpy(dtype=float)
            low, q1, median, q3, high = np.percentile(values, [0, 25, 50, 75, 100])
            rows.append((UserCategory(int(category)).label, quantity, values.size, low, q1, median, q3, high))
    return pd.DataFrame(rows, columns=list(RANGE_COLUMNS))


def write_ranges(ranges, stream):
    ranges.to_csv(stream, index=False, float_format='%.6f', lineterminator='\n')


def write_report(out_dir, report, tests, assignment, transitions=None, ranges=None):
    """Write homophily.csv, kruskal_wallis.csv and summary.txt into ``out_dir``; ranges.csv when given"""
    with open(out_dir / 'homophily.csv', 'w', newline='', encoding='utf-8') as f:
        report.write(f)
    with open(out_dir / 'kruskal_wallis.csv', 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['test', 'statistic', 'pvalue', 'df'])
        for name, result in tests.items():
            if result is None:
                writer.writerow([name, '', '', ''])
            else:
                writer.writerow([name, f'{result.statistic:.6f}', f'{result.pvalue:.6g}', result.df])

    lines = ['Category counts']
    for category, count in assignment.counts().items():
        lines.append(f'  {UserCategory(category).label}: {count}')
    lines.append('')
    lines.append(f'Homophily (margin {report.margin}; {report.labelled_edges} labelled edges, '
                 f'{report.excluded_edges} excluded)')
    for r in report.rows:
        verdict = 'homophily' if r.verdict else 'no homophily'
        lines.append(f'  {r.label}: x={r.x:.6f} x^2={r.x_squared:.6f} x(all edges)={r.x_all_edges:.6f} -> {verdict}')
    lines.append('')
    lines.append('Kruskal-Wallis')
    for name, result in tests.items():
        if result is None:
            lines.append(f'  {name}: not enough groups')
        else:
            lines.append(f'  {name}: H={result.statistic:.4f} df={result.df} p={result.pvalue:.4g}')
    if ranges is not None:
        with open(out_dir / 'ranges.csv', 'w', newline='', encoding='utf-8') as f:
            write_ranges(ranges, f)
        lines.append('')
        lines.append('Ranges (min, q1, median, q3, max)')
        for r in ranges.itertuples(index=False):
            lines.append(
                f'  {r.category} {r.quantity}: {r.min:.4f} {r.q1:.4f} {r.median:.4f} {r.q3:.4f} {r.max:.4f} '
                f'({r.samples} samples)'
            )
    if transitions is not None:
        matrix, fraction = transitions
        lines.append('')
        lines.append(f'Changing fraction: {fraction:.4f}')
        for source in range(3):
            for target in range(3):
                if source != target:
                    lines.append(
                        f'  {UserCategory(source).label} -> {UserCategory(target).label}: '
                        f'{matrix.off_diagonal[source, target]:.4f}'
                    )
    (out_dir / 'summary.txt').write_text('\n'.join(lines) + '\n', encoding='utf-8')

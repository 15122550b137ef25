"""
Input-conditioned shift distributions.

For every category the input toxicity range [0, 1] is cut into bins; each
input bin carries a histogram over shift values in [-1, 1]. Sampling picks
the input bin holding the average incoming toxicity, a shift bin with
probability equal to its density, then a uniform value inside that bin.
"""
from dataclasses import dataclass
import csv
import io
import logging

import numpy as np

from .categories import CATEGORY_ORDER, BehaviorError, UserCategory

logger = logging.getLogger(__name__)

CSV_HEADER = ('category', 'input_lo', 'input_hi', 'shift_lo', 'shift_hi', 'density')
EDGE_TOLERANCE = 1e-9


class DistributionError(BehaviorError):
    pass


@dataclass(frozen=True, eq=False)
class ShiftHistogram:
    lo: np.ndarray
    hi: np.ndarray
    density: np.ndarray

    @property
    def cumulative(self):
        return np.cumsum(self.density)

    def mean(self):
        return float(np.sum(self.density * (self.lo + self.hi) / 2))


@dataclass(frozen=True, eq=False)
class CategoryShifts:
    input_edges: np.ndarray
    histograms: tuple

    def input_bin(self, values):
        """Index of the input bin holding each value; the last bin is right-closed"""
        index = np.searchsorted(self.input_edges, values, side='right') - 1
        return np.clip(index, 0, len(self.histograms) - 1)

    @property
    def midpoints(self):
        return (self.input_edges[:-1] + self.input_edges[1:]) / 2


class ShiftDistribution:
    """Per-category shift histograms conditioned on average incoming toxicity"""

    def __init__(self, categories):
        self.categories = dict(categories)
        self._tables = {}

    def __contains__(self, category):
        return category in self.categories

    def shifts_for(self, category):
        try:
            return self.categories[UserCategory(int(category))]
        except KeyError:
            raise DistributionError(f'no shift distribution for {UserCategory(int(category)).label}')

    def _table(self, category, bin_index):
        """Cumulative densities for one input bin, built once"""
        key = (int(category), int(bin_index))
        if key not in self._tables:
            hist = self.shifts_for(category).histograms[bin_index]
            if hist.density.size == 0 or hist.density.sum() <= 0:
                raise DistributionError(
                    f'empty shift histogram for {UserCategory(int(category)).label} input bin {bin_index}'
                )
            self._tables[key] = (hist.cumulative, hist.lo, hist.hi)
        return self._tables[key]

    def sample_many(self, categories, inputs, u_bin, u_pos):
        """
        Vectorised sampling for parallel arrays of categories and inputs.

        ``u_bin`` picks the shift bin and ``u_pos`` the position inside it;
        both are uniforms in [0, 1).
        """
        categories = np.asarray(categories)
        inputs = np.asarray(inputs, dtype=float)
        u_bin = np.asarray(u_bin, dtype=float)
        u_pos = np.asarray(u_pos, dtype=float)
        shifts = np.zeros(inputs.size)
        for category in np.unique(categories):
            in_category = np.flatnonzero(categories == category)
            bins = self.shifts_for(category).input_bin(inputs[in_category])
            for bin_index in np.unique(bins):
                rows = in_category[bins == bin_index]
                cumulative, lo, hi = self._table(category, bin_index)
                j = np.searchsorted(cumulative / cumulative[-1], u_bin[rows], side='right')
                j = np.minimum(j, lo.size - 1)
                shifts[rows] = lo[j] + u_pos[rows] * (hi[j] - lo[j])
        return shifts

    def support(self, category):
        """(min, max) shift over every bin of a category"""
        shifts = self.shifts_for(category)
        return (
            min(float(h.lo.min()) for h in shifts.histograms),
            max(float(h.hi.max()) for h in shifts.histograms),
        )

    def expected_output(self, category):
        """Input-bin midpoints and I + E[shift | I] at each midpoint"""
        shifts = self.shifts_for(category)
        midpoints = shifts.midpoints
        means = np.array([h.mean() for h in shifts.histograms])
        return midpoints, midpoints + means

    def is_monotone(self):
        """True when expected output is non-decreasing in input for every category"""
        return all(
            np.all(np.diff(self.expected_output(category)[1]) >= -1e-12)
            for category in self.categories
        )

    @classmethod
    def point_mass(cls, value=0.0, bins=1, categories=CATEGORY_ORDER):
        edges = np.linspace(0.0, 1.0, bins + 1)
        hist = ShiftHistogram(np.array([value]), np.array([value]), np.array([1.0]))
        return cls({
            category: CategoryShifts(edges, tuple(hist for _ in range(bins)))
            for category in categories
        })


def sample_shift(d, cat, avg_in_tox, rng):
    """Draw one shift for category ``cat`` at average incoming toxicity ``avg_in_tox``"""
    if not 0.0 <= avg_in_tox <= 1.0:
        raise DistributionError(f'average incoming toxicity {avg_in_tox} outside [0, 1]')
    u_bin, u_pos = rng.random(2)
    return float(d.sample_many([int(cat)], [avg_in_tox], [u_bin], [u_pos])[0])


@dataclass(frozen=True)
class UniformShiftFamily:
    """Uniform shift on [mu(I) - w, mu(I) + w] clipped to [floor, ceiling]"""
    centre: object
    half_width: float
    floor: float
    ceiling: float

    def bounds(self, inputs):
        mu = self.centre(np.asarray(inputs, dtype=float))
        return np.maximum(mu - self.half_width, self.floor), np.minimum(mu + self.half_width, self.ceiling)

    def binned(self, edges):
        lo, hi = self.bounds((edges[:-1] + edges[1:]) / 2)
        return CategoryShifts(edges, tuple(
            ShiftHistogram(np.array([a]), np.array([b]), np.array([1.0])) for a, b in zip(lo, hi)
        ))


class ParametricShiftDistribution(ShiftDistribution):
    """
    Shift families evaluated at the exact incoming toxicity.

    The binned histograms (centres at input-bin midpoints) back export and
    expected output; sampling uses the family itself.
    """

    def __init__(self, families, bins):
        edges = np.linspace(0.0, 1.0, bins + 1)
        super().__init__({category: family.binned(edges) for category, family in families.items()})
        self.families = dict(families)

    def family(self, category):
        try:
            return self.families[UserCategory(int(category))]
        except KeyError:
            raise DistributionError(f'no shift distribution for {UserCategory(int(category)).label}')

    def sample_many(self, categories, inputs, u_bin, u_pos):
        categories = np.asarray(categories)
        inputs = np.asarray(inputs, dtype=float)
        u_pos = np.asarray(u_pos, dtype=float)
        shifts = np.zeros(inputs.size)
        for category in np.unique(categories):
            rows = np.flatnonzero(categories == category)
            lo, hi = self.family(category).bounds(inputs[rows])
            shifts[rows] = lo + u_pos[rows] * (hi - lo)
        return shifts

    def support(self, category):
        # centres are linear in I, so the clipped bounds peak at the ends of [0, 1]
        lo, hi = self.family(category).bounds(np.array([0.0, 1.0]))
        return float(lo.min()), float(hi.max())


def synthetic_shift_distribution(bins=20):
    """
    Parametric stand-in for the empirical Twitter shift distribution.

    Supports follow the Twitter shift ranges; the means make I + E[shift]
    non-decreasing in I, the condition under which lowering incoming
    toxicity lowers expected output. ``bins`` only sets the resolution of
    the exported histograms.
    """
    if bins < 1:
        raise DistributionError('at least one input bin is required')
    return ParametricShiftDistribution({
        UserCategory.AMPLIFIER: UniformShiftFamily(lambda i: 0.45 * (1 - i), 0.10, 0.0, 0.9),
        UserCategory.ATTENUATOR: UniformShiftFamily(lambda i: -0.5 * i, 0.10, -0.7, 0.2),
        UserCategory.COPYCAT: UniformShiftFamily(lambda i: 0.0 * i, 0.05, -0.05, 0.05),
    }, bins)


def load_shift_distribution(source):
    """
    Read and validate a shift-distribution CSV.

    Densities of an input bin are renormalised when they sum to within
    [0.99, 1.01] and rejected otherwise. Input bins of a category must
    tile [0, 1] without gaps or overlaps.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    lines = (line.decode('utf-8') if isinstance(line, bytes) else line for line in source)

    rows = {}
    for line_number, row in enumerate(csv.reader(lines), start=1):
        if not row or row[0].strip().startswith('#'):
            continue
        if row[0].strip().lower() == 'category':
            continue
        if len(row) != 6:
            raise DistributionError(f'line {line_number}: expected 6 fields, got {len(row)}')
        try:
            category = UserCategory.from_name(row[0])
            input_lo, input_hi, shift_lo, shift_hi, density = (float(x) for x in row[1:])
        except (BehaviorError, ValueError) as e:
            raise DistributionError(f'line {line_number}: {e}')
        if density < 0:
            raise DistributionError(f'line {line_number}: negative density {density}')
        if not (0.0 <= input_lo < input_hi <= 1.0):
            raise DistributionError(f'line {line_number}: bad input bin [{input_lo}, {input_hi}]')
        if not (-1.0 <= shift_lo <= shift_hi <= 1.0):
            raise DistributionError(f'line {line_number}: bad shift bin [{shift_lo}, {shift_hi}]')
        rows.setdefault(category, {}).setdefault((input_lo, input_hi), []).append((shift_lo, shift_hi, density))

    if not rows:
        raise DistributionError('shift distribution has no rows')

    categories = {}
    for category, by_input in rows.items():
        input_bins = sorted(by_input)
        if abs(input_bins[0][0]) > EDGE_TOLERANCE or abs(input_bins[-1][1] - 1.0) > EDGE_TOLERANCE:
            raise DistributionError(f'{category.label}: input bins do not cover [0, 1] (gap)')
        for (_, previous_hi), (lo, _) in zip(input_bins, input_bins[1:]):
            if lo < previous_hi - EDGE_TOLERANCE:
                raise DistributionError(f'{category.label}: overlapping input bins at {lo}')
            if lo > previous_hi + EDGE_TOLERANCE:
                raise DistributionError(f'{category.label}: gap in input coverage at {previous_hi}')

        histograms = []
        for key in input_bins:
            cells = sorted(by_input[key])
            for (_, previous_hi, _), (lo, _, _) in zip(cells, cells[1:]):
                if lo < previous_hi - EDGE_TOLERANCE:
                    raise DistributionError(f'{category.label}: overlapping shift bins at {lo}')
            density = np.array([c[2] for c in cells])
            total = density.sum()
            if not 0.99 <= total <= 1.01:
                raise DistributionError(
                    f'{category.label}: densities of input bin {key} sum to {total}, not 1'
                )
            histograms.append(ShiftHistogram(
                lo=np.array([c[0] for c in cells]),
                hi=np.array([c[1] for c in cells]),
                density=density / total,
            ))
        edges = np.array([b[0] for b in input_bins] + [input_bins[-1][1]])
        categories[category] = CategoryShifts(edges, tuple(histograms))

    logger.info(f'Loaded shift distribution for {sorted(c.label for c in categories)}')
    return ShiftDistribution(categories)


def save_shift_distribution(d, stream):
    """Write every non-zero density cell; full float precision"""
    stream.write(','.join(CSV_HEADER) + '\n')
    for category in CATEGORY_ORDER:
        if category not in d:
            continue
        shifts = d.shifts_for(category)
        for i, hist in enumerate(shifts.histograms):
            lo_in, hi_in = float(shifts.input_edges[i]), float(shifts.input_edges[i + 1])
            for lo, hi, density in zip(hist.lo.tolist(), hist.hi.tolist(), hist.density.tolist()):
                if density > 0:
                    stream.write(f'{category.label},{lo_in!r},{hi_in!r},{lo!r},{hi!r},{density!r}\n')

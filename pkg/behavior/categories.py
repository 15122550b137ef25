"""
User categories, category assignment and category-transition dynamics.
"""
from dataclasses import dataclass
import csv
import io
import logging

import numpy as np
from django.db import models

logger = logging.getLogger(__name__)


class BehaviorError(ValueError):
    """Base error for category and shift configuration"""


class ProportionError(BehaviorError):
    pass


class TransitionError(BehaviorError):
    pass


class UserCategory(models.IntegerChoices):
    AMPLIFIER = 0, 'amplifier'
    ATTENUATOR = 1, 'attenuator'
    COPYCAT = 2, 'copycat'

    @classmethod
    def from_name(cls, name):
        name = name.strip().lower()
        for member in cls:
            if member.label == name:
                return member
        raise BehaviorError(f'unknown user category {name!r}')


CATEGORY_ORDER = (UserCategory.AMPLIFIER, UserCategory.ATTENUATOR, UserCategory.COPYCAT)


@dataclass(frozen=True, eq=False)
class CategoryProfile:
    """Per-node category (int8 codes of UserCategory) and changing flag"""
    category: np.ndarray
    changing: np.ndarray

    @property
    def node_count(self):
        return int(self.category.size)

    def counts(self):
        return {member: int(np.sum(self.category == member)) for member in CATEGORY_ORDER}

    def with_bots(self, count):
        """Pad ``count`` bot rows: bots are copycats that never change"""
        if count <= 0:
            return self
        return CategoryProfile(
            category=np.concatenate([self.category, np.full(count, UserCategory.COPYCAT, dtype=np.int8)]),
            changing=np.concatenate([self.changing, np.zeros(count, dtype=bool)]),
        )


def _rounded(n, fraction):
    return int(np.floor(n * fraction + 0.5))


def assign_categories(g, fractions, changing_fraction, seed):
    """
    Randomly assign users to categories in the given proportions.

    Amplifier and attenuator counts are round(n * fraction); the remainder
    goes to copycats. Changing flags are drawn independently of category.
    ``seed`` is an int or a numpy Generator.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ProportionError(f'category fractions {fractions} must be non-negative and sum to 1')
    if not 0.0 <= changing_fraction <= 1.0:
        raise ProportionError(f'changing fraction {changing_fraction} outside [0, 1]')

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = g.user_count
    n_amp = min(_rounded(n, fractions[0]), n)
    n_atn = min(_rounded(n, fractions[1]), n - n_amp)

    category = np.full(n, UserCategory.COPYCAT, dtype=np.int8)
    order = rng.permutation(n)
    category[order[:n_amp]] = UserCategory.AMPLIFIER
    category[order[n_amp:n_amp + n_atn]] = UserCategory.ATTENUATOR

    changing = np.zeros(n, dtype=bool)
    changing[rng.permutation(n)[:_rounded(n, changing_fraction)]] = True

    profile = CategoryProfile(category=category, changing=changing)
    logger.debug(f'Assigned categories {profile.counts()} with {int(changing.sum())} changing users')
    return profile


# Off-diagonal probabilities observed on Twitter, rows = from, columns = to,
# both in CATEGORY_ORDER.
DEFAULT_TRANSITIONS = (
    (0.0, 0.0314, 0.2903),
    (0.0347, 0.0, 0.1874),
    (0.2826, 0.1737, 0.0),
)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Off-diagonal P(from -> to); staying takes the remaining row mass"""
    off_diagonal: np.ndarray

    def __post_init__(self):
        m = np.array(self.off_diagonal, dtype=float)
        if m.shape != (3, 3):
            raise TransitionError('transition matrix must be 3x3')
        np.fill_diagonal(m, 0.0)
        if np.any(m < 0) or np.any(m > 1):
            raise TransitionError('transition probabilities must lie in [0, 1]')
        if np.any(m.sum(axis=1) > 1 + 1e-12):
            raise TransitionError('off-diagonal row sums must not exceed 1')
        m.setflags(write=False)
        object.__setattr__(self, 'off_diagonal', m)

    @classmethod
    def default(cls):
        return cls(np.array(DEFAULT_TRANSITIONS))

    def probability(self, source, target):
        return float(self.stochastic()[source, target])

    def stochastic(self):
        m = self.off_diagonal.copy()
        np.fill_diagonal(m, 1.0 - m.sum(axis=1))
        return m

    def step_many(self, categories, changing, draws):
        """Vectorised step_category over arrays of categories, flags and uniform draws"""
        categories = np.asarray(categories, dtype=np.int8)
        cumulative = np.cumsum(self.stochastic(), axis=1)
        rows = cumulative[categories]
        moved = (np.asarray(draws)[:, None] >= rows).sum(axis=1)
        moved = np.minimum(moved, 2).astype(np.int8)
        return np.where(np.asarray(changing, dtype=bool), moved, categories)

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return np.array_equal(self.off_diagonal, other.off_diagonal)

    __hash__ = None


def step_category(current, changing, m, draw):
    """
    Next category of one user given a uniform ``draw`` in [0, 1).

    Non-changing users keep their category for any draw.
    """
    if not changing:
        return UserCategory(current)
    cumulative = np.cumsum(m.stochastic()[int(current)])
    index = int(np.searchsorted(cumulative, draw, side='right'))
    return CATEGORY_ORDER[min(index, 2)]


def load_transition_matrix(source=None):
    """
    Read ``from,to,prob`` rows; unspecified entries are 0.

    With no source the Twitter defaults are returned.
    """
    if source is None:
        return TransitionMatrix.default()
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode('utf-8'))
    m = np.zeros((3, 3))
    for line_number, row in enumerate(csv.reader(_text_lines(source)), start=1):
        if not row or row[0].strip().startswith('#'):
            continue
        if line_number == 1 and row[0].strip().lower() == 'from':
            continue
        if len(row) != 3:
            raise TransitionError(f'line {line_number}: expected from,to,prob')
        source_cat = UserCategory.from_name(row[0])
        target_cat = UserCategory.from_name(row[1])
        if source_cat == target_cat:
            raise TransitionError(f'line {line_number}: stay probability is implied, not listed')
        try:
            m[source_cat, target_cat] = float(row[2])
        except ValueError:
            raise TransitionError(f'line {line_number}: bad probability {row[2]!r}')
    return TransitionMatrix(m)


def save_transition_matrix(m, stream):
    stream.write('from,to,prob\n')
    for source_cat in CATEGORY_ORDER:
        for target_cat in CATEGORY_ORDER:
            if source_cat != target_cat:
                stream.write(f'{source_cat.label},{target_cat.label},{float(m.off_diagonal[source_cat, target_cat])!r}\n')


def _text_lines(source):
    for line in source:
        yield line.decode('utf-8') if isinstance(line, bytes) else line

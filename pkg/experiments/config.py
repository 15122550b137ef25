"""
Experiment configuration files and option resolution.

Files hold flat ``key = value`` lines (``KEY=value`` works too, ``#``
starts a comment). Values are cast through a typed ``environ.Env`` scheme.
Resolution order: SIMULATION_DEFAULTS, then the file, then CLI flags.
"""
import argparse
import logging

import environ
from django.conf import settings

logger = logging.getLogger(__name__)

CONFIG_SCHEME = {
    'NAME': str,
    'GRAPH': str,
    'ER_N': int,
    'ER_P': float,
    'AMPLIFIER_FRACTION': float,
    'ATTENUATOR_FRACTION': float,
    'COPYCAT_FRACTION': float,
    'CHANGING_FRACTION': float,
    'WEEKS': int,
    'HOPS_PER_WEEK': int,
    'INPUT_BINS': int,
    'SEED_FRACTION': float,
    'INITIAL_TOXICITY_LO': float,
    'INITIAL_TOXICITY_HI': float,
    'CATEGORY_CADENCE': str,
    'ZERO_CLAMPED_ACTIVE': bool,
    'SHIFT_DIST': str,
    'TRANSITIONS': str,
    'BOTS': [int],
    'STRATEGIES': [str],
    'RUNS': int,
    'SEED': int,
    'FIXED_GRAPH': bool,
}

# CLI destinations that map onto config keys under another name
OPTION_KEYS = {'strategy': 'strategies'}


class ConfigError(ValueError):
    pass


def read_config_file(stream):
    """Raw ``key -> text`` pairs; keys lowercased with dashes as underscores"""
    raw = {}
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode('utf-8')
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise ConfigError(f'line {line_number}: expected key = value')
        key = key.strip().lower().replace('-', '_')
        if key.upper() not in CONFIG_SCHEME:
            raise ConfigError(f'line {line_number}: unknown setting {key!r}')
        raw[key] = value.split('#', 1)[0].strip()
    return raw


def cast_config(raw):
    env = environ.Env(**CONFIG_SCHEME)
    env.ENVIRON = {key.upper(): value for key, value in raw.items()}
    try:
        return {key: env(key.upper()) for key in raw}
    except ValueError as e:
        raise ConfigError(str(e))


def load_config(path):
    with open(path, 'rb') as f:
        values = cast_config(read_config_file(f))
    logger.info(f'Loaded {len(values)} settings from {path}')
    return values


def resolve(options, config_path=None):
    """
    Merge defaults, the config file and CLI options into one mapping.

    CLI options equal to None are treated as not given.
    """
    resolved = dict(settings.SIMULATION_DEFAULTS)
    resolved.update(shift_dist='synthetic', strategies=['rp', 'li'], fixed_graph=False)
    if config_path:
        resolved.update(load_config(config_path))
    for option, value in options.items():
        key = OPTION_KEYS.get(option, option)
        if value is not None and key.upper() in CONFIG_SCHEME:
            resolved[key] = value
    return resolved


def form_data(resolved):
    """Form-ready values: lists become comma-separated text"""
    return {
        key: ','.join(str(v) for v in value) if isinstance(value, (list, tuple)) else value
        for key, value in resolved.items()
    }


def write_resolved(values, stream):
    """Sorted ``key = value`` lines that load_config reads back"""
    for key in sorted(values):
        value = values[key]
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ','.join(str(v) for v in value)
        stream.write(f'{key} = {value}\n')


def comma_ints(value):
    try:
        return [int(part) for part in value.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {value!r}')


def add_simulation_arguments(parser):
    """Flags shared by the simulate and experiment commands; unset flags stay None"""
    parser.add_argument('--config', help='key = value settings file')
    parser.add_argument('--name', help='Label for the run')
    parser.add_argument('--graph', help='Edge list path (instead of an ER graph)')
    parser.add_argument('--er-n', type=int, help='ER node count')
    parser.add_argument('--er-p', type=float, help='ER edge probability')
    parser.add_argument('--weeks', type=int)
    parser.add_argument('--hops-per-week', type=int)
    parser.add_argument('--bots', type=comma_ints, help='Comma-separated bot counts, e.g. 56,112,224,560')
    parser.add_argument(
        '--strategy', action='append', choices=['rp', 'li'],
        help='Placement strategy; repeat for several',
    )
    parser.add_argument('--runs', type=int)
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--shift-dist', help='"synthetic" or a shift-distribution CSV')
    parser.add_argument('--transitions', help='Transition CSV (from,to,prob)')
    parser.add_argument('--out-dir', help='Directory for the outputs')
    parser.add_argument(
        '--fixed-graph', action='store_const', const=True,
        help='Share one graph across all runs',
    )

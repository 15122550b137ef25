"""
Peace-bot deployment.

A peace-bot is an extra node with toxicity fixed at 0 and exactly one
out-edge, to its target user. Bots are appended after the users so user
ids, and every per-user random stream, are the same with or without bots.
"""
from dataclasses import dataclass
import csv
import logging

import numpy as np
from django.db import models

from graphs.digraph import DirectedGraph

logger = logging.getLogger(__name__)

MANIFEST_HEADER = ('bot_id', 'target_id', 'strategy', 'seed')


class DeploymentError(ValueError):
    pass


class PlacementStrategy(models.TextChoices):
    BASELINE = 'baseline', 'Baseline (no bots)'
    RANDOM = 'rp', 'Random Placement'
    LOWEST_INDEGREE = 'li', 'Lowest Indegree'


@dataclass(frozen=True, eq=False)
class BotDeployment:
    bot_nodes: np.ndarray
    targets: np.ndarray
    graph: DirectedGraph
    strategy: str
    seed: int = None

    @property
    def n_bots(self):
        return int(self.bot_nodes.size)

    def write_manifest(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(MANIFEST_HEADER)
        seed = '' if self.seed is None else self.seed
        for bot, target in zip(self.bot_nodes.tolist(), self.targets.tolist()):
            writer.writerow([bot, target, self.strategy, seed])


def select_targets(g, n_bots, strategy, rng=None):
    """
    Users that receive one bot each.

    Random placement takes a prefix of a random permutation, so for one
    generator state smaller deployments are subsets of larger ones. Lowest
    indegree orders users by (indegree, id) on the graph without bots.
    """
    users = g.user_count
    if strategy == PlacementStrategy.RANDOM:
        if rng is None:
            raise DeploymentError('random placement needs a random generator')
        return rng.permutation(users)[:n_bots]
    if strategy == PlacementStrategy.LOWEST_INDEGREE:
        indegrees = g.indegrees[:users]
        return np.lexsort((np.arange(users), indegrees))[:n_bots]
    raise DeploymentError(f'no targets for strategy {strategy!r}')


def deploy_bots(g, n_bots, strategy, seed=None):
    """
    Append ``n_bots`` peace-bots to a copy of ``g``.

    ``seed`` is an int or a numpy Generator; only random placement uses it.
    """
    strategy = PlacementStrategy(strategy)
    if strategy == PlacementStrategy.BASELINE:
        raise DeploymentError('the baseline deploys no bots')
    if g.bot_count:
        raise DeploymentError('graph already carries bots')
    if not 1 <= n_bots <= g.user_count:
        raise DeploymentError(f'bot count {n_bots} outside [1, {g.user_count}]')

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    targets = np.asarray(select_targets(g, n_bots, strategy, rng), dtype=np.int64)
    bot_nodes = np.arange(g.node_count, g.node_count + n_bots, dtype=np.int64)
    graph = g.augmented(bot_nodes, targets, n_bots)
    logger.info(f'Deployed {n_bots} {strategy.label} bots on {g.user_count} users')
    return BotDeployment(
        bot_nodes=bot_nodes,
        targets=targets,
        graph=graph,
        strategy=strategy.value,
        seed=None if isinstance(seed, np.random.Generator) else seed,
    )


def percentage_reduction(baseline_total, intervened_total):
    if baseline_total <= 0:
        raise DeploymentError(f'baseline total toxicity must be positive, got {baseline_total}')
    return 100.0 * (baseline_total - intervened_total) / baseline_total


def bot_effect_on_average(avg, indeg):
    """Average incoming toxicity once one zero-toxicity source joins ``indeg`` others"""
    if indeg < 0:
        raise DeploymentError(f'indegree must be non-negative, got {indeg}')
    return avg * indeg / (indeg + 1)


def bot_drop(avg, indeg):
    return avg - bot_effect_on_average(avg, indeg)

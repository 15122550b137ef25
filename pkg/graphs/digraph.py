"""
Immutable directed graphs over dense node ids, stored as CSR arrays.

Node ids are contiguous from 0. Ids at or above ``user_count`` are peace-bots
appended by the intervention app; plain graphs have ``user_count == node_count``.
"""
from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np

logger = logging.getLogger(__name__)


class GraphError(ValueError):
    """Base error for graph construction and lookup"""


class GraphValidationError(GraphError):
    """Edges violate the graph invariants (self-loops, ids out of range)"""


class GraphFormatError(GraphError):
    """An edge-list line could not be parsed"""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f'line {line_number}: {message}'
        super().__init__(message)


class NodeOutOfRange(GraphError, IndexError):
    """A node id outside [0, node_count)"""


def _csr(keys, values, node_count):
    """Group ``values`` by ``keys`` into (indptr, indices), values ascending per key"""
    order = np.lexsort((values, keys))
    counts = np.bincount(keys, minlength=node_count)
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, values[order].astype(np.int64, copy=False)


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    node_count: int
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray
    user_count: int = None
    external_ids: np.ndarray = None
    dropped_duplicates: int = 0
    dropped_self_loops: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.user_count is None:
            object.__setattr__(self, 'user_count', self.node_count)

    @classmethod
    def from_edges(cls, src, dst, node_count, *, external_ids=None, drop_self_loops=False, **meta):
        """
        Build a graph from parallel src/dst arrays.

        Duplicate edges are collapsed and counted. Self-loops raise
        GraphValidationError unless ``drop_self_loops`` is set, in which case
        they are removed and counted.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise GraphValidationError('src and dst must have the same length')
        if node_count < 0:
            raise GraphValidationError('node_count must be non-negative')
        if src.size and (src.min() < 0 or dst.min() < 0 or src.max() >= node_count or dst.max() >= node_count):
            raise GraphValidationError(f'edge endpoint outside [0, {node_count})')

        loops = src == dst
        dropped_self_loops = int(loops.sum())
        if dropped_self_loops:
            if not drop_self_loops:
                node = int(src[loops][0])
                raise GraphValidationError(f'self-loop on node {node}')
            src, dst = src[~loops], dst[~loops]

        keys = np.unique(src * max(node_count, 1) + dst)
        dropped_duplicates = int(src.size - keys.size)
        src = keys // max(node_count, 1)
        dst = keys % max(node_count, 1)

        out_indptr, out_indices = _csr(src, dst, node_count)
        in_indptr, in_indices = _csr(dst, src, node_count)
        return cls(
            node_count=int(node_count),
            out_indptr=out_indptr,
            out_indices=out_indices,
            in_indptr=in_indptr,
            in_indices=in_indices,
            external_ids=None if external_ids is None else np.asarray(external_ids, dtype=np.int64),
            dropped_duplicates=dropped_duplicates,
            dropped_self_loops=dropped_self_loops,
            meta=dict(meta),
        )

    @cached_property
    def edge_arrays(self):
        """(src, dst) arrays sorted by (src, dst)"""
        src = np.repeat(np.arange(self.node_count, dtype=np.int64), np.diff(self.out_indptr))
        return src, self.out_indices

    @property
    def edge_count(self):
        return int(self.out_indices.size)

    @cached_property
    def indegrees(self):
        return np.diff(self.in_indptr)

    @cached_property
    def outdegrees(self):
        return np.diff(self.out_indptr)

    @property
    def bot_count(self):
        return self.node_count - self.user_count

    def _check(self, v):
        if not 0 <= v < self.node_count:
            raise NodeOutOfRange(f'node {v} outside [0, {self.node_count})')

    def out_neighbors(self, v):
        self._check(v)
        return self.out_indices[self.out_indptr[v]:self.out_indptr[v + 1]]

    def in_neighbors(self, v):
        self._check(v)
        return self.in_indices[self.in_indptr[v]:self.in_indptr[v + 1]]

    def has_edge(self, u, v):
        neighbors = self.out_neighbors(u)
        i = np.searchsorted(neighbors, v)
        return bool(i < neighbors.size and neighbors[i] == v)

    def augmented(self, extra_src, extra_dst, extra_nodes):
        """
        Return a copy with ``extra_nodes`` appended and extra edges added.

        The appended nodes count as bots: ``user_count`` is carried over
        from this graph.
        """
        src, dst = self.edge_arrays
        graph = DirectedGraph.from_edges(
            np.concatenate([src, np.asarray(extra_src, dtype=np.int64)]),
            np.concatenate([dst, np.asarray(extra_dst, dtype=np.int64)]),
            self.node_count + int(extra_nodes),
            external_ids=self.external_ids,
            **self.meta,
        )
        object.__setattr__(graph, 'user_count', self.user_count)
        return graph

    def users_subgraph_equals(self, other):
        """True when the edges among users of this graph equal ``other``'s edges"""
        src, dst = self.edge_arrays
        keep = (src < self.user_count) & (dst < self.user_count)
        other_src, other_dst = other.edge_arrays
        return (
            self.user_count == other.node_count
            and np.array_equal(src[keep], other_src)
            and np.array_equal(dst[keep], other_dst)
        )

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.user_count == other.user_count
            and np.array_equal(self.out_indptr, other.out_indptr)
            and np.array_equal(self.out_indices, other.out_indices)
        )

    __hash__ = None

    def __repr__(self):
        return f'DirectedGraph(nodes={self.node_count}, edges={self.edge_count}, bots={self.bot_count})'


def indegree(g, v):
    g._check(v)
    return int(g.in_indptr[v + 1] - g.in_indptr[v])


def outdegree(g, v):
    g._check(v)
    return int(g.out_indptr[v + 1] - g.out_indptr[v])


def generate_er(n, p, seed):
    """
    Directed Erdős–Rényi graph G(n, p) without self-loops.

    Walks the n(n-1) ordered pairs with geometric gaps, which is exactly the
    independent-Bernoulli model but costs O(edges) instead of O(n^2).
    """
    if n is None or n < 1:
        raise GraphValidationError('n must be at least 1')
    if not 0.0 <= p <= 1.0:
        raise GraphValidationError(f'edge probability {p} outside [0, 1]')

    pairs = n * (n - 1)
    rng = np.random.default_rng(seed)
    if pairs == 0 or p == 0.0:
        positions = np.empty(0, dtype=np.int64)
    else:
        chunk = int(pairs * p * 1.05) + 1024
        chunks = []
        start = -1
        while start < pairs - 1:
            gaps = rng.geometric(p, size=chunk)
            steps = start + np.cumsum(gaps, dtype=np.int64)
            chunks.append(steps[steps < pairs])
            start = int(steps[-1])
        positions = np.concatenate(chunks)

    u = positions // (n - 1) if n > 1 else positions
    r = positions % (n - 1) if n > 1 else positions
    v = r + (r >= u)
    graph = DirectedGraph.from_edges(u, v, n, generator='er', n=n, p=p, seed=seed)
    logger.info(f'Generated ER graph n={n} p={p} seed={seed}: {graph.edge_count} edges')
    return graph

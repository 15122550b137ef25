"""
Edge-list text I/O.

Format: one edge per line, two whitespace-separated decimal integers
``src dst``; ``#`` starts a comment line. The id-map sidecar holds
``external_id internal_id`` per line.
"""
import logging

import numpy as np

from .digraph import DirectedGraph, GraphFormatError, GraphValidationError

logger = logging.getLogger(__name__)


def _decode(line):
    if isinstance(line, bytes):
        try:
            return line.decode('utf-8')
        except UnicodeDecodeError:
            return line.decode('latin-1')
    return line


def _read_pairs(source, header=None):
    """
    Yield (line_number, a, b) for every data line of an edge-list-like stream.

    A ``# nodes N`` comment declares the node count and is stored in ``header``.
    """
    for line_number, raw in enumerate(source, start=1):
        line = _decode(raw).strip()
        if line.startswith('#'):
            words = line[1:].split()
            if header is not None and len(words) == 2 and words[0] == 'nodes' and words[1].isdigit():
                header['nodes'] = int(words[1])
            continue
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f'expected two ids, got {len(parts)} fields', line_number)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f'non-integer id in {line!r}', line_number)
        if a < 0 or b < 0:
            raise GraphFormatError(f'negative id in {line!r}', line_number)
        yield line_number, a, b


def load_edge_list(source, remap=False, drop_self_loops=False):
    """
    Read a graph from a byte or text stream of ``src dst`` lines.

    Without ``remap`` the graph spans ids 0..max_id as written. With
    ``remap`` the external ids are mapped to 0..k-1 in ascending order and
    kept on ``graph.external_ids``.
    """
    src, dst = [], []
    header = {}
    for line_number, a, b in _read_pairs(source, header):
        if a == b and not drop_self_loops:
            raise GraphValidationError(f'line {line_number}: self-loop on node {a}')
        src.append(a)
        dst.append(b)

    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    external_ids = None
    if remap:
        external_ids, inverse = np.unique(np.concatenate([src, dst]), return_inverse=True)
        src, dst = inverse[:src.size], inverse[src.size:]
        node_count = int(external_ids.size)
    else:
        node_count = int(max(src.max(), dst.max()) + 1) if src.size else 0
        node_count = max(node_count, header.get('nodes', 0))

    graph = DirectedGraph.from_edges(
        src, dst, node_count, external_ids=external_ids, drop_self_loops=drop_self_loops
    )
    if graph.dropped_duplicates or graph.dropped_self_loops:
        logger.warning(
            f'Edge list cleaned: {graph.dropped_duplicates} duplicate edges collapsed, '
            f'{graph.dropped_self_loops} self-loops dropped'
        )
    logger.info(f'Loaded edge list: {graph.node_count} nodes, {graph.edge_count} edges')
    return graph


def save_edge_list(graph, stream):
    """Write internal ids, one edge per line, after a ``# nodes N`` header"""
    stream.write(f'# nodes {graph.node_count}\n')
    src, dst = graph.edge_arrays
    for a, b in zip(src.tolist(), dst.tolist()):
        stream.write(f'{a} {b}\n')


def save_id_map(graph, stream):
    external = graph.external_ids
    if external is None:
        external = np.arange(graph.user_count)
    for internal, ext in enumerate(external.tolist()):
        stream.write(f'{ext} {internal}\n')


def load_id_map(source):
    """Read an id-map sidecar into a dict external_id -> internal_id"""
    id_map = {}
    for line_number, ext, internal in _read_pairs(source):
        if ext in id_map and id_map[ext] != internal:
            raise GraphFormatError(f'external id {ext} mapped twice', line_number)
        id_map[ext] = internal
    return id_map


def id_map_for(graph):
    """external -> internal mapping of a graph (identity when ids were not remapped)"""
    if graph.external_ids is None:
        return {i: i for i in range(graph.user_count)}
    return {int(ext): i for i, ext in enumerate(graph.external_ids.tolist())}

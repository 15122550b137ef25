"""
Named random streams for one simulation run.

Every stream is derived from (master seed, run index, purpose) through
``SeedSequence`` spawn keys, so no stream depends on how many draws another
stream consumed. Hop draws come from a Philox generator whose counter is
positioned by hop number; row i of a hop's draw array always belongs to
node i whatever the node count.
"""
import numpy as np

GRAPH, CATEGORIES, SEEDING, HOPS, BOTS = range(5)
DRAWS_PER_NODE = 3


class RngStreams:
    def __init__(self, seed, run_index=0):
        self.seed = int(seed)
        self.run_index = int(run_index)
        self._hop_key = self.sequence(HOPS).generate_state(2, dtype=np.uint64)

    def sequence(self, purpose):
        return np.random.SeedSequence(self.seed, spawn_key=(self.run_index, purpose))

    def generator(self, purpose):
        return np.random.default_rng(self.sequence(purpose))

    @property
    def graph(self):
        return self.generator(GRAPH)

    @property
    def categories(self):
        return self.generator(CATEGORIES)

    @property
    def seeding(self):
        return self.generator(SEEDING)

    def hop_draws(self, hop, node_count):
        """
        Uniform draws of shape (node_count, 3) for one hop.

        Columns: shift bin, position within the shift bin, category transition.
        """
        bit_generator = np.random.Philox(key=self._hop_key, counter=[0, 0, 0, int(hop)])
        return np.random.Generator(bit_generator).random((node_count, DRAWS_PER_NODE))

    @property
    def bot_seed(self):
        """Integer seed for bot placement, recorded in deployment manifests"""
        return int(self.sequence(BOTS).generate_state(1, dtype=np.uint32)[0])

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from graphs.digraph import GraphError, generate_er
from graphs.edgelist import save_edge_list
import logging
import os
import time

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Generate a directed Erdős–Rényi graph and write it as an edge list'

    def add_arguments(self, parser):
        parser.add_argument('--er-n', type=int, required=True, help='Number of nodes')
        parser.add_argument(
            '--er-p',
            type=float,
            default=settings.SIMULATION_DEFAULTS['er_p'],
            help='Edge probability for every ordered pair',
        )
        parser.add_argument('--seed', type=int, default=settings.SIMULATION_DEFAULTS['seed'])
        parser.add_argument('--out-dir', default=settings.OUTPUT_ROOT)

    def handle(self, *args, **options):
        start_time = time.time()
        try:
            graph = generate_er(options['er_n'], options['er_p'], options['seed'])
        except GraphError as e:
            raise CommandError(str(e))

        os.makedirs(options['out_dir'], exist_ok=True)
        path = os.path.join(options['out_dir'], 'graph.edgelist')
        with open(path, 'w') as f:
            f.write(f"# er n={options['er_n']} p={options['er_p']} seed={options['seed']}\n")
            save_edge_list(graph, f)

        self.stdout.write(self.style.SUCCESS(
            f'Wrote {graph.node_count} nodes and {graph.edge_count} edges to {path}'
        ))
        self.stdout.write(f'Execution time: {time.time() - start_time:.2f} seconds')

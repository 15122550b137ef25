from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from pathlib import Path
import logging
import time

from analytics.categorize import categorize_buckets, category_transitions, label_samples
from analytics.errors import AnalyticsError
from analytics.shifts import WEIGHTINGS, compute_shifts, export_shift_distribution, read_posts
from analytics.stats import (
    OBSERVATIONS, category_ranges, changing_labels, dependence_tests, homophily, write_report,
)
from behavior.categories import BehaviorError, save_transition_matrix
from graphs.digraph import GraphError
from graphs.edgelist import load_edge_list, load_id_map

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Compute shifts, categories, homophily and dependence tests from scored posts'

    def add_arguments(self, parser):
        defaults = settings.ANALYTICS_DEFAULTS
        parser.add_argument('--posts', required=True, help='CSV with user_id,bucket,toxicity')
        parser.add_argument('--graph', required=True, help='Follower edge list (src dst per line)')
        parser.add_argument(
            '--id-map',
            help='Sidecar mapping external ids to graph ids; without it the edge list ids are remapped',
        )
        parser.add_argument('--bins', type=int, default=defaults['input_bins'], help='Input toxicity bins')
        parser.add_argument('--shift-bins', type=int, default=defaults['shift_bins'], help='Shift bins over [-1, 1]')
        parser.add_argument('--margin', type=float, default=defaults['homophily_margin'])
        parser.add_argument('--whisker', type=float, default=defaults['iqr_whisker'])
        parser.add_argument('--weighting', choices=WEIGHTINGS, default=defaults['weighting'])
        parser.add_argument('--observations', choices=OBSERVATIONS, default='sample')
        parser.add_argument('--population', choices=('changing', 'all'), default='changing')
        parser.add_argument('--out-dir', help='Directory for the reports')

    def handle(self, *args, **options):
        start_time = time.time()
        out_dir = Path(options['out_dir'] or Path(settings.OUTPUT_ROOT) / 'analysis')
        out_dir.mkdir(parents=True, exist_ok=True)

        try:
            with open(options['graph'], 'rb') as f:
                graph = load_edge_list(f, remap=options['id_map'] is None)
            id_map = None
            if options['id_map']:
                with open(options['id_map'], 'rb') as f:
                    id_map = load_id_map(f)
            with open(options['posts'], 'rb') as f:
                posts = read_posts(f)

            table = compute_shifts(posts, graph, id_map=id_map, weighting=options['weighting'])
            if table.unresolved_users:
                self.stdout.write(self.style.WARNING(
                    f'{table.unresolved_users} posting users were not found in the graph'
                ))
            assignment = categorize_buckets(table, whisker=options['whisker'])
            try:
                transitions = category_transitions(assignment, population=options['population'])
            except AnalyticsError as e:
                logger.warning(f'Transitions not estimated: {e}')
                self.stdout.write(self.style.WARNING(f'Transitions not estimated: {e}'))
                transitions = None

            report = homophily(graph, changing_labels(assignment, graph.user_count), margin=options['margin'])
            tests = dependence_tests(table, assignment, bins=options['bins'], observations=options['observations'])
            ranges = category_ranges(table, assignment)
        except (OSError, GraphError, BehaviorError, AnalyticsError) as e:
            logger.error(f'Analysis failed: {e}')
            raise CommandError(str(e))

        try:
            exported = export_shift_distribution(
                label_samples(table, assignment), bins=options['bins'], shift_bins=options['shift_bins'],
            )
        except AnalyticsError as e:
            logger.warning(f'Shift distribution not exported: {e}')
            self.stdout.write(self.style.WARNING(f'Shift distribution not exported: {e}'))
            exported = None

        with open(out_dir / 'shifts.csv', 'w', newline='', encoding='utf-8') as f:
            table.write(f)
        with open(out_dir / 'categories.csv', 'w', newline='', encoding='utf-8') as f:
            assignment.write(f)
        if exported is not None:
            with open(out_dir / 'shift_distribution.csv', 'w', newline='', encoding='utf-8') as f:
                exported.write(f)
        if transitions is not None:
            with open(out_dir / 'transitions.csv', 'w', newline='', encoding='utf-8') as f:
                save_transition_matrix(transitions[0], f)
        write_report(out_dir, report, tests, assignment, transitions, ranges)

        if exported is not None and exported.filled_bins:
            self.stdout.write(self.style.WARNING(
                f'{len(exported.filled_bins)} empty input bins were filled with a zero shift'
            ))
        execution_time = time.time() - start_time
        self.stdout.write(self.style.SUCCESS(
            f'Analysed {len(table)} shift samples from {len(assignment.overall)} users into {out_dir}'
        ))
        self.stdout.write(f'Execution time: {execution_time:.2f} seconds')

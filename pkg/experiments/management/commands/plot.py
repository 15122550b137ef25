from django.core.management.base import BaseCommand, CommandError
from pathlib import Path
import logging

from diffusion.engine import SimulationError, read_metrics_csv
from experiments.plotting import PlotError, emit_plot

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Plot mean toxicity per week from one or more metrics CSVs'

    def add_arguments(self, parser):
        parser.add_argument('metrics', nargs='+', help='metrics_run<k>.csv files')
        parser.add_argument('--run-id', action='append', help='Only plot these run ids; repeat for several')
        parser.add_argument('--out', help='SVG path (default: plot.svg next to the first metrics file)')

    def handle(self, *args, **options):
        series = []
        try:
            for path in options['metrics']:
                with open(path, newline='', encoding='utf-8') as f:
                    series.extend(read_metrics_csv(f))
        except (OSError, SimulationError) as e:
            raise CommandError(f'Could not read metrics: {e}')

        if options['run_id']:
            wanted = set(options['run_id'])
            series = [s for s in series if s.run_id in wanted]

        out = Path(options['out'] or Path(options['metrics'][0]).with_name('plot.svg'))
        try:
            emit_plot(series, out)
        except PlotError as e:
            raise CommandError(str(e))
        self.stdout.write(self.style.SUCCESS(f'Plotted {len(series)} series to {out}'))

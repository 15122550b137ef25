from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from pathlib import Path
import logging
import time

from behavior.categories import BehaviorError
from diffusion.engine import SimulationError, write_metrics_csv
from experiments.config import ConfigError, add_simulation_arguments, form_data, resolve, write_resolved
from experiments.forms import ExperimentSpecForm, SimulationForm, form_errors
from experiments.harness import ExperimentSpec, execute_seed, series_from_rows
from graphs.digraph import GraphError
from intervention.bots import DeploymentError

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Run one simulation, optionally with peace-bots, and write its weekly metrics'

    def add_arguments(self, parser):
        add_simulation_arguments(parser)

    def handle(self, *args, **options):
        start_time = time.time()
        try:
            resolved = resolve(options, options['config'])
        except (OSError, ConfigError) as e:
            raise CommandError(f'Could not read config: {e}')

        form_class = ExperimentSpecForm if resolved.get('bots') else SimulationForm
        form = form_class(data=form_data(resolved))
        if not form.is_valid():
            raise CommandError(f'Invalid settings: {form_errors(form)}')
        spec = ExperimentSpec.from_form({**form.cleaned_data, 'runs': 1})

        out_dir = Path(options['out_dir'] or Path(settings.OUTPUT_ROOT) / (spec.name or 'simulation'))
        out_dir.mkdir(parents=True, exist_ok=True)

        try:
            result = execute_seed(spec, 0)
        except (OSError, GraphError, BehaviorError, SimulationError, DeploymentError) as e:
            logger.error(f'Simulation failed: {e}')
            raise CommandError(str(e))

        series = [series_from_rows(s['run_id'], result['user_count'], s['rows']) for s in result['series']]
        with open(out_dir / 'metrics_run0.csv', 'w', newline='', encoding='utf-8') as f:
            write_metrics_csv(series, f)
        for cell in result['cells']:
            path = out_dir / f'deployment_{cell["strategy"]}_{cell["n_bots"]}_run0.csv'
            path.write_text(cell['manifest'], encoding='utf-8')
        with open(out_dir / 'resolved_config.txt', 'w', encoding='utf-8') as f:
            write_resolved(spec.settings(), f)

        baseline = series[0]
        self.stdout.write(
            f'Baseline: {result["nodes"]} nodes, {result["edges"]} edges, '
            f'final total toxicity {baseline.final_total:.6f}'
        )
        for cell in result['cells']:
            self.stdout.write(f'{cell["strategy"]} with {cell["n_bots"]} bots: {cell["reduction"]:.4f}% reduction')
        self.stdout.write(self.style.SUCCESS(f'Metrics written to {out_dir / "metrics_run0.csv"}'))
        self.stdout.write(f'Execution time: {time.time() - start_time:.2f} seconds')

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from pathlib import Path
import json
import logging
import time

from behavior.categories import BehaviorError
from diffusion.engine import SimulationError
from experiments.config import ConfigError, add_simulation_arguments, form_data, resolve
from experiments.forms import ExperimentSpecForm, form_errors
from experiments.harness import ExperimentSpec, run_experiment
from experiments.models import Experiment
from experiments.plotting import PlotError
from graphs.digraph import GraphError
from intervention.bots import DeploymentError

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Run a baseline vs peace-bot sweep over several seeds and write the reduction table'

    def add_arguments(self, parser):
        add_simulation_arguments(parser)
        parser.add_argument('--no-record', action='store_true', help='Do not store the results in the database')

    def handle(self, *args, **options):
        start_time = time.time()
        try:
            resolved = resolve(options, options['config'])
        except (OSError, ConfigError) as e:
            raise CommandError(f'Could not read config: {e}')

        form = ExperimentSpecForm(data=form_data(resolved))
        if not form.is_valid():
            raise CommandError(f'Invalid settings: {form_errors(form)}')
        spec = ExperimentSpec.from_form(form.cleaned_data)
        out_dir = Path(options['out_dir'] or Path(settings.OUTPUT_ROOT) / (spec.name or 'experiment'))

        self.stdout.write(f'Running {spec.runs} seeds over {len(spec.cells)} cells...')
        try:
            result = run_experiment(spec, out_dir)
        except (OSError, GraphError, BehaviorError, SimulationError, DeploymentError, PlotError) as e:
            logger.error(f'Experiment failed: {e}')
            raise CommandError(str(e))

        for row in result.table.rows:
            self.stdout.write(
                f'{row.strategy:>3} {row.n_bots:>6} bots: {row.mean:8.4f}% (std {row.std:.4f})'
            )

        if not options['no_record']:
            self._record(spec, out_dir, result.table)

        self.stdout.write(self.style.SUCCESS(f'Experiment written to {out_dir}'))
        self.stdout.write(f'Execution time: {time.time() - start_time:.2f} seconds')

    def _record(self, spec, out_dir, table):
        try:
            experiment = Experiment.objects.create(
                name=spec.name,
                master_seed=spec.seed,
                runs=spec.runs,
                config=json.dumps(spec.to_dict(), sort_keys=True),
                output_dir=str(out_dir),
            )
            experiment.record_table(table)
        except DatabaseError as e:
            logger.warning(f'Results not recorded in the database: {e}')
            self.stdout.write(self.style.WARNING(f'Results not recorded in the database: {e}'))

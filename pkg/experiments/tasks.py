from celery import shared_task
import logging

from .harness import ExperimentSpec, execute_seed

logger = logging.getLogger(__name__)


@shared_task
def run_seed(spec_dict, run_index):
    """Task to run the baseline and every cell for one seed"""
    spec = ExperimentSpec.from_dict(spec_dict)
    logger.info(f'Starting seed {run_index} of experiment {spec.name or "unnamed"}')

    try:
        result = execute_seed(spec, run_index)
    except Exception as e:
        logger.error(f'Error running seed {run_index}: {str(e)}')
        raise

    logger.info(f'Finished seed {run_index}: {len(result["cells"])} cells')
    return {
        'status': 'success',
        'run_index': run_index,
        'result': result,
    }

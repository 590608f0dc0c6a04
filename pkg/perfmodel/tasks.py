"""
Celery tasks for sweep points, simulation replications and ledger updates.
"""

import logging

from celery import shared_task

from .config import config_from_entries
from .models import AnalysisRun
from .services import evaluate_sweep_point
from .simulator import SimConfig, simulate_replication

logger = logging.getLogger(__name__)

# New Relic integration for tasks
try:
    import newrelic.agent
except ImportError:
    newrelic = None


@shared_task
def solve_sweep_batch(entries: list, batch: list):
    """
    Solve a contiguous slice of a sweep grid.

    Args:
        entries: raw (key, value) pairs of the base config
        batch: [overrides, point] pairs in grid order
    """
    config = config_from_entries({key: (value, 0) for key, value in entries})
    if newrelic:
        newrelic.agent.add_custom_attribute('config_hash', config.config_hash)
        newrelic.agent.add_custom_attribute('batch_size', len(batch))
    rows = [evaluate_sweep_point(config, overrides, point) for overrides, point in batch]
    logger.info(f"Solved sweep batch of {len(rows)} points")
    return rows


@shared_task
def run_replication(sim_payload: dict, replication_index: int):
    """Run one simulation replication and return its metrics and counters."""
    sim = SimConfig.from_payload(sim_payload)
    if newrelic:
        newrelic.agent.add_custom_attribute('seed', sim.seed)
        newrelic.agent.add_custom_attribute('replication', replication_index)
    try:
        result = simulate_replication(sim, replication_index)
    except Exception as exc:
        logger.error(f"Replication {replication_index} failed: {exc}")
        if newrelic:
            newrelic.agent.record_exception()
        raise
    return {'index': result.index, 'metrics': result.metrics, 'counters': result.counters}


@shared_task
def record_analysis_run(run_id: int, exit_code: int, summary: dict = None, error: str = ''):
    """
    Close a ledger row.

    Args:
        run_id: AnalysisRun ID
        exit_code: 0 success, 1 failure, 2 not converged
        summary: headline metrics
        error: message when the command raised
    """
    try:
        run = AnalysisRun.objects.get(id=run_id)
        if error:
            run.fail_run(error)
        else:
            run.complete_run(exit_code, summary)
        logger.info(f"Recorded run {run_id} as {run.run_status}")
    except AnalysisRun.DoesNotExist:
        logger.error(f"Run {run_id} not found")

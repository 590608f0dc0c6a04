from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
from pathlib import Path
import logging

import pandas as pd
from django.conf import settings
from django.db import DatabaseError

from .config import SweepSpec, SystemConfig, config_from_entries, load_config, load_sweep_spec
from .coupler import CoupledSolution, fixed_point_solve
from .exceptions import PerfModelError
from .models import AnalysisRun
from .report import PerformanceReport, build_report
from .simulator import SimConfig, SimStats, run_simulation, validate_against_analytic
from .writers import sweep_frame

logger = logging.getLogger(__name__)

# New Relic integration for services
try:
    import newrelic.agent
except ImportError:
    newrelic = None


def _annotate(**attributes):
    if newrelic:
        for key, value in attributes.items():
            newrelic.agent.add_custom_attribute(key, value)


def _batches(items: Sequence, jobs: int) -> List[List]:
    """Split items into at most `jobs` contiguous batches, preserving order."""
    jobs = max(1, min(jobs, len(items)))
    size, extra = divmod(len(items), jobs)
    batches, start = [], 0
    for position in range(jobs):
        end = start + size + (1 if position < extra else 0)
        batches.append(list(items[start:end]))
        start = end
    return [batch for batch in batches if batch]


def evaluate_sweep_point(config: SystemConfig, overrides: Mapping[str, str],
                         point: Mapping[str, Union[int, float]]) -> Dict:
    """Solve one grid point; failures come back in-row instead of raising."""
    row: Dict = dict(point)
    try:
        varied = config.with_overrides(overrides)
        report = build_report(fixed_point_solve(varied), varied)
    except PerfModelError as exc:
        logger.warning(f"Sweep point {dict(point)} failed: {exc}")
        if newrelic:
            newrelic.agent.record_exception()
        row.update({'converged': False, 'flags': '', 'error': f"{type(exc).__name__}: {exc}"})
        return row
    row.update(report.as_row())
    row['error'] = ''
    return row


class ConfigService:
    """Locate and parse configuration and sweep files."""

    def resolve(self, path: Union[str, Path]) -> Path:
        """Plain paths first, then the bundled configs directory."""
        candidate = Path(path)
        if candidate.exists():
            return candidate
        bundled = Path(settings.PERFMODEL_SETTINGS['CONFIGS_DIR']) / candidate.name
        if bundled.exists():
            return bundled
        raise FileNotFoundError(f"no such config file: {path}")

    def load(self, path: Union[str, Path]) -> SystemConfig:
        return load_config(self.resolve(path))

    def load_sweep(self, path: Union[str, Path]) -> SweepSpec:
        return load_sweep_spec(self.resolve(path))


class AnalysisService:
    """Solve, sweep, simulate and validate one configuration."""

    def solve(self, config: SystemConfig) -> Tuple[PerformanceReport, CoupledSolution]:
        solution = fixed_point_solve(config)
        report = build_report(solution, config)
        _annotate(config_hash=config.config_hash, converged=solution.converged,
                  outer_iterations=solution.outer_iterations, inner_iterations=solution.inner_iterations)
        return report, solution

    def sweep(self, config: SystemConfig, spec: SweepSpec, jobs: int = 1) -> pd.DataFrame:
        points = spec.grid()
        logger.info(f"Sweeping {len(points)} grid points over {[axis.path for axis in spec.axes]}")
        _annotate(config_hash=config.config_hash, sweep_points=len(points))
        if jobs > 1:
            from .tasks import solve_sweep_batch
            from celery import group

            entries = [list(entry) for entry in config.entries]
            batches = _batches(points, jobs)
            job = group(
                solve_sweep_batch.s(entries, [[spec.overrides(point), point] for point in batch])
                for batch in batches
            )
            rows = [row for batch_rows in job.apply_async().get(disable_sync_subtasks=False) for row in batch_rows]
        else:
            rows = [evaluate_sweep_point(config, spec.overrides(point), point) for point in points]
        failed = sum(1 for row in rows if row.get('error'))
        if failed:
            logger.warning(f"{failed} of {len(rows)} sweep points failed")
        return sweep_frame([axis.path for axis in spec.axes], rows, spec.outputs)

    def simulate(self, config: SystemConfig, seed: Optional[int] = None, replications: Optional[int] = None,
                 horizon: Optional[float] = None, jobs: int = 1) -> SimStats:
        sim = SimConfig.from_system(config, seed=seed, replications=replications, horizon=horizon)
        _annotate(config_hash=config.config_hash, seed=sim.seed, replications=sim.replications)
        if jobs <= 1:
            return run_simulation(sim)

        from .tasks import run_replication
        from celery import group

        from .simulator import ReplicationResult

        payload = sim.to_payload()
        job = group(run_replication.s(payload, index) for index in range(sim.replications))
        results = [
            ReplicationResult(index=item['index'], metrics=item['metrics'], counters=item['counters'])
            for item in job.apply_async().get(disable_sync_subtasks=False)
        ]
        return SimStats.from_replications(sim, results)

    def validate(self, config: SystemConfig, seed: Optional[int] = None, tol: Optional[float] = None,
                 replications: Optional[int] = None, horizon: Optional[float] = None, jobs: int = 1):
        """Analytic report vs simulation on the same parameters."""
        if tol is None:
            tol = settings.PERFMODEL_SETTINGS['VALIDATION_TOLERANCE']
        report, solution = self.solve(config)
        sim_stats = self.simulate(config, seed=seed, replications=replications, horizon=horizon, jobs=jobs)
        verdict = validate_against_analytic(report, sim_stats, tol)
        _annotate(validation_passed=verdict.passed)
        logger.info(f"Validation {'passed' if verdict.passed else 'failed'} at tolerance {tol:g}")
        return verdict, report, sim_stats


class RunLedgerService:
    """Service for AnalysisRun bookkeeping; a missing table never breaks a command."""

    def start(self, kind: str, config_path: str, config_hash: str = '') -> Optional[AnalysisRun]:
        try:
            run = AnalysisRun.objects.create(kind=kind, config_path=str(config_path), config_hash=config_hash)
            run.start_run()
            return run
        except DatabaseError as exc:
            logger.warning(f"Run ledger unavailable ({exc}); run not recorded. Did you run migrate?")
            return None

    def finish(self, run: Optional[AnalysisRun], exit_code: int, summary: Dict = None,
               error: str = ''):
        if run is None:
            return
        from .tasks import record_analysis_run

        record_analysis_run.delay(run.id, exit_code, summary or {}, error)

    def list_runs(self, kind: Optional[str] = None, limit: int = 20):
        return list(AnalysisRun.objects.remembered().of_kind(kind)[:limit])

    def forget(self, run_id: int) -> AnalysisRun:
        run = AnalysisRun.objects.remembered().get(id=run_id)
        run.forget()
        return run

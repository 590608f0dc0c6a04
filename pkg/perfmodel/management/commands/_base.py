"""
Shared plumbing for the msp-perf management commands.
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from perfmodel.exceptions import PerfModelError
from perfmodel.services import AnalysisService, ConfigService, RunLedgerService

logger = logging.getLogger('perfmodel.commands')

# New Relic integration for commands
try:
    import newrelic.agent
except ImportError:
    newrelic = None

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


class PerfCommand(BaseCommand):
    """
    Base command: config loading, error mapping and optional run recording.

    Subclasses implement `run(config, **options)` and return
    (exit_code, summary).
    """

    kind = ''
    needs_config = True

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.configs = ConfigService()
        self.analysis = AnalysisService()
        self.ledger = RunLedgerService()

    def add_arguments(self, parser):
        if self.needs_config:
            parser.add_argument('--config', required=True, help='Configuration file (.cfg)')
        parser.add_argument('--record', action='store_true', help='Store the run in the run ledger')

    def add_jobs_argument(self, parser):
        parser.add_argument('--jobs', type=int, default=1, help='Parallel batches dispatched through Celery')

    def handle(self, *args, **options):
        # run() receives the parsed config, never the path
        config_path = options.pop('config', None) or ''
        run = None
        try:
            config = self.configs.load(config_path) if self.needs_config else None
            if options['record']:
                run = self.ledger.start(self.kind, config_path, config.config_hash if config else '')
            exit_code, summary = self.run(config, **options)
        except (PerfModelError, OSError, ValueError) as exc:
            message = f"{type(exc).__name__}: {exc}"
            logger.error(f"{self.kind} failed: {message}")
            if newrelic:
                newrelic.agent.record_exception()
            self.ledger.finish(run, EXIT_ERROR, error=message)
            raise CommandError(message, returncode=EXIT_ERROR) from exc

        self.ledger.finish(run, exit_code, summary)
        if exit_code == EXIT_NOT_CONVERGED:
            raise CommandError("fixed point not reached; results were written with converged=false",
                               returncode=EXIT_NOT_CONVERGED)
        if exit_code != EXIT_OK:
            raise CommandError(summary.get('message', 'command failed'), returncode=exit_code)

    def run(self, config, **options):
        raise NotImplementedError

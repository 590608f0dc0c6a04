from django.core.management.base import CommandError

from perfmodel.models import AnalysisRun

from ._base import EXIT_OK, PerfCommand


class Command(PerfCommand):
    help = 'List recorded runs or forget one'
    kind = 'runs'
    needs_config = False

    def add_arguments(self, parser):
        parser.add_argument('--kind', choices=[choice for choice, _ in AnalysisRun.KIND_CHOICES])
        parser.add_argument('--limit', type=int, default=20)
        parser.add_argument('--forget', type=int, metavar='ID', help='Hide the run with this id from the listing')
        parser.set_defaults(record=False)

    def run(self, config, **options):
        if options['forget'] is not None:
            try:
                run = self.ledger.forget(options['forget'])
            except AnalysisRun.DoesNotExist:
                raise CommandError(f"no active run with id {options['forget']}", returncode=1)
            self.stdout.write(f"Forgot run {run.id}")
            return EXIT_OK, {}

        runs = self.ledger.list_runs(options['kind'], options['limit'])
        for run in runs:
            finished = run.completed_at.isoformat(timespec='seconds') if run.completed_at else '-'
            self.stdout.write(
                f"{run.id:>5}  {run.kind:<9} {run.run_status:<14} exit={run.exit_code if run.exit_code is not None else '-'}"
                f"  {run.config_hash[:12]:<12}  {finished}  {run.config_path}"
            )
        if not runs:
            self.stdout.write("No runs recorded.")
        return EXIT_OK, {}

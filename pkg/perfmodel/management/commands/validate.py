from perfmodel.writers import write_verdict

from ._base import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, PerfCommand


class Command(PerfCommand):
    help = 'Compare the analytic report with a simulation of the same configuration'
    kind = 'validate'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--seed', type=int, default=None)
        parser.add_argument('--tol', type=float, default=None, help='Relative tolerance (default 0.10)')
        parser.add_argument('--replications', type=int, default=None)
        parser.add_argument('--horizon', type=float, default=None, help='Simulated time in the base unit')
        parser.add_argument('--out', default=None, help='Optional output stem for the verdict table')
        self.add_jobs_argument(parser)

    def run(self, config, **options):
        verdict, report, sim_stats = self.analysis.validate(
            config, seed=options['seed'], tol=options['tol'],
            replications=options['replications'], horizon=options['horizon'], jobs=options['jobs'],
        )
        self.stdout.write(verdict.as_table())
        if options['out']:
            write_verdict(verdict, options['out'], {
                'config_hash': report.provenance.config_hash,
                'seed': sim_stats.seed,
                'converged': report.converged,
            })

        summary = {
            'passed': verdict.passed,
            'failures': [check.name for check in verdict.failures],
        }
        if not report.converged:
            return EXIT_NOT_CONVERGED, summary
        if not verdict.passed:
            summary['message'] = f"validation failed on {', '.join(summary['failures'])}"
            return EXIT_ERROR, summary
        return EXIT_OK, summary

from perfmodel.writers import write_sweep

from ._base import EXIT_OK, PerfCommand


class Command(PerfCommand):
    help = 'Evaluate a what-if grid of one or two swept parameters, one CSV row per point'
    kind = 'sweep'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--spec', required=True, help='Sweep spec file (.sweep)')
        parser.add_argument('--out', required=True, help='Output stem; writes <stem>.csv and <stem>.json')
        self.add_jobs_argument(parser)

    def run(self, config, **options):
        spec = self.configs.load_sweep(options['spec'])
        frame = self.analysis.sweep(config, spec, jobs=options['jobs'])
        csv_path, _ = write_sweep(frame, options['out'])

        failed = int((frame['error'] != '').sum())
        not_converged = int((~frame['converged']).sum()) - failed
        self.stdout.write(
            f"{len(frame)} points: {len(frame) - failed - not_converged} converged, "
            f"{not_converged} not converged, {failed} failed; wrote {csv_path}"
        )
        return EXIT_OK, {'points': len(frame), 'failed': failed, 'not_converged': not_converged}

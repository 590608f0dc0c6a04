from perfmodel.writers import write_report

from ._base import EXIT_NOT_CONVERGED, EXIT_OK, PerfCommand


class Command(PerfCommand):
    help = 'Solve the coupled model for one configuration and write the report as CSV and JSON'
    kind = 'solve'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='Output stem; writes <stem>.csv and <stem>.json')

    def run(self, config, **options):
        report, solution = self.analysis.solve(config)
        csv_path, json_path = write_report(report, options['out'])

        micro, macro = report.micro, report.macro
        self.stdout.write(f"config {report.provenance.config_hash[:12]} ({config.time_unit}s)")
        self.stdout.write(f"  micro rejection    {micro.rejection:.6g}")
        self.stdout.write(f"  micro total delay  {micro.total_delay:.6g}")
        self.stdout.write(f"  micro immediate    {micro.p_immediate:.6g}")
        self.stdout.write(f"  mean VMs           {micro.mean_vms:.6g}")
        self.stdout.write(f"  mean containers    {micro.mean_containers:.6g}")
        self.stdout.write(f"  mean utilization   {micro.mean_util:.6g}")
        self.stdout.write(f"  macro rejection    {macro.rejection:.6g}")
        self.stdout.write(f"  macro total delay  {macro.total_delay:.6g}")
        if report.provenance.flags:
            self.stdout.write(f"  flags              {', '.join(report.provenance.flags)}")
        self.stdout.write(
            f"{'converged' if solution.converged else 'NOT converged'} after "
            f"{solution.outer_iterations} outer / {solution.inner_iterations} inner iterations; "
            f"wrote {csv_path} and {json_path}"
        )
        summary = {
            'converged': solution.converged,
            'micro_rejection': micro.rejection,
            'macro_rejection': macro.rejection,
            'micro_total_delay': micro.total_delay,
        }
        return (EXIT_OK if solution.converged else EXIT_NOT_CONVERGED), summary

from perfmodel.writers import write_sim_stats

from ._base import EXIT_OK, PerfCommand


class Command(PerfCommand):
    help = 'Simulate the platform and write per-metric means, variances and 95% intervals'
    kind = 'simulate'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='Output stem; writes <stem>.csv and <stem>.json')
        parser.add_argument('--seed', type=int, default=None, help='Root RNG seed (defaults to sim.seed)')
        parser.add_argument('--replications', type=int, default=None)
        parser.add_argument('--horizon', type=float, default=None, help='Simulated time in the base unit')
        self.add_jobs_argument(parser)

    def run(self, config, **options):
        sim_stats = self.analysis.simulate(
            config, seed=options['seed'], replications=options['replications'],
            horizon=options['horizon'], jobs=options['jobs'],
        )
        csv_path, _ = write_sim_stats(sim_stats, options['out'])
        for name, summary in sim_stats.metrics.items():
            self.stdout.write(f"  {name:<24} {summary.mean:>12.6g} +/- {summary.half_width:.3g}")
        self.stdout.write(f"{sim_stats.replications} replications (seed {sim_stats.seed}); wrote {csv_path}")
        return EXIT_OK, {name: summary.mean for name, summary in sim_stats.metrics.items()}

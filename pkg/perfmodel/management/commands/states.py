from perfmodel.csm import enumerated_state_count, published_state_count
from perfmodel.pmsm import pmsm_state_count
from perfmodel.vmsm import vmsm_state_count

from ._base import EXIT_OK, PerfCommand


class Command(PerfCommand):
    help = 'Print the state-space size of each sub-model next to the closed-form size formulas'
    kind = 'states'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Configuration file (.cfg)')
        parser.set_defaults(record=False)

    def run(self, config, **options):
        micro, macro = config.micro, config.macro
        csm = enumerated_state_count(micro.min_vms, micro.max_vms, micro.containers_per_vm)
        csm_formula = published_state_count(micro.min_vms, micro.max_vms, micro.containers_per_vm)
        vms = macro.vms_per_pm
        rows = [
            ('CSM', csm, f"M*S^2 - s*M*S = {csm_formula}"),
            ('PMSM', pmsm_state_count(macro.queue_size), f"2*L_Q + 1 = {2 * macro.queue_size + 1}"),
            ('VMSM', vmsm_state_count(vms), f"(m+1)(m+2)/2 = {(vms + 1) * (vms + 2) // 2}"),
        ]
        self.stdout.write(f"{'model':<6} {'states':>10}  formula")
        for name, count, formula in rows:
            self.stdout.write(f"{name:<6} {count:>10}  {formula}")
        total = csm + rows[1][1] + rows[2][1]
        self.stdout.write(f"{'total':<6} {total:>10}")
        return EXIT_OK, {'csm': csm, 'pmsm': rows[1][1], 'vmsm': rows[2][1]}

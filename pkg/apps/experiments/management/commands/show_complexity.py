from apps.experiments.management.base import ExperimentCommand
from apps.learning.networks import build_drn, build_rc, flops_count, param_count


class Command(ExperimentCommand):
    help = "Per-layer parameters and multiplications of the RC and DRN networks"

    def add_arguments(self, parser):
        parser.add_argument("--slots", type=int, default=15, help="Pilot length Q")
        parser.add_argument("--regions", type=int, default=3, help="Regions T")
        parser.add_argument("--bs-elements", type=int, default=9, help="BS antennas M")
        parser.add_argument(
            "--irs-elements", type=int, default=9, help="IRS elements N"
        )

    def run(self, **options):
        Q, T = options["slots"], options["regions"]
        M, N = options["bs_elements"], options["irs_elements"]
        for spec in (build_rc(Q, T), build_drn(Q, M, N)):
            params = param_count(spec)
            flops = flops_count(spec)
            mults = dict(flops.per_layer)
            self.stdout.write(self.style.MIGRATE_HEADING(spec.name.upper()))
            self.stdout.write(f"  {'layer':<16}{'params':>12}{'mults':>14}")
            for name, count in params.per_layer:
                self.stdout.write(f"  {name:<16}{count:>12}{mults.get(name, 0):>14}")
            self.stdout.write(f"  {'total':<16}{int(params):>12}{flops.total:>14}")
            status = (
                self.style.SUCCESS("matches")
                if flops.matches
                else self.style.ERROR("differs")
            )
            self.stdout.write(f"  closed form {flops.closed_form} ({status})")

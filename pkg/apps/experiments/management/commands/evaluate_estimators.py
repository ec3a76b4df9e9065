from apps.experiments.management.base import ExperimentCommand, parse_snr_grid
from apps.experiments.services import ROUTING_MODES, EvaluationService


class Command(ExperimentCommand):
    help = "Evaluate LS, MMSE, CRLB and the trained estimators against SNR"

    def add_arguments(self, parser):
        self.add_output_argument(parser)
        parser.add_argument(
            "--snr-grid",
            type=str,
            default=None,
            help="Comma separated SNR values in dB (default: the scenario's grid)",
        )
        parser.add_argument(
            "--routing",
            choices=ROUTING_MODES,
            default="rc",
            help="Route test samples with the classifier or by their true region",
        )
        self.add_async_argument(parser)

    def run(self, **options):
        out = self.output_dir(options)
        grid = None
        if options["snr_grid"] is not None:
            grid = parse_snr_grid(options["snr_grid"])

        if options["run_async"]:
            from apps.experiments.tasks import evaluate_estimators_async

            task = evaluate_estimators_async.delay(
                str(out), None if grid is None else list(grid), options["routing"]
            )
            self.stdout.write(self.style.SUCCESS(f"📬 Queued evaluation: {task.id}"))
            return

        frame = EvaluationService.evaluate(out, grid, options["routing"])
        table = frame.pivot_table(
            index="snr_db", columns="estimator", values="nmse_mean", sort=True
        )
        self.stdout.write(table.to_string(float_format=lambda v: f"{v:.3e}"))
        self.stdout.write(
            self.style.SUCCESS(f"✅ {len(frame)} rows written to {out / 'results'}")
        )

from django.conf import settings

from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services import DatasetService


class Command(ExperimentCommand):
    help = "Generate the train/val/test datasets of a scenario"

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        self.add_output_argument(parser)
        parser.add_argument(
            "--workers",
            type=int,
            default=settings.NFCE_WORKERS,
            help="Threads drawing users in parallel",
        )
        self.add_async_argument(parser)

    def run(self, **options):
        out = self.output_dir(options)
        if options["run_async"]:
            from apps.experiments.tasks import generate_datasets_async

            task = generate_datasets_async.delay(
                options["scenario"],
                str(out),
                self.scenario_overrides(options),
                options["workers"],
            )
            self.stdout.write(self.style.SUCCESS(f"📬 Queued generation: {task.id}"))
            return

        scenario = self.load_scenario(options)
        self.stdout.write(
            f"🛰️ Generating {scenario.n_samples} samples "
            f"({scenario.n_regions} regions × {scenario.users_per_region} users × "
            f"{scenario.samples_per_user}) into {out}"
        )
        counts = DatasetService.generate(
            scenario,
            out,
            workers=options["workers"],
            scenario_path=options["scenario"],
        )
        self.stdout.write(
            self.style.SUCCESS(
                f"✅ train/val/test = {counts['train']}/{counts['val']}/"
                f"{counts['test']} (manifest {counts['manifest_hash'][:12]})"
            )
        )

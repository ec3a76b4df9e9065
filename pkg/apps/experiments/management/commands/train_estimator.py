import dataclasses

from django.conf import settings
from django.core.management.base import CommandError

from apps.experiments.management.base import ExperimentCommand, parse_sizes
from apps.experiments.services import RC, TRAIN_KINDS, TrainingService
from apps.learning.training import TrainingSchedule


class Command(ExperimentCommand):
    help = (
        "Train a model kind on the generated datasets: the region classifier "
        "(rc), per-region estimators (sr, sr-nores) or the federated estimator "
        "(fl, fl-nores)"
    )

    def add_arguments(self, parser):
        parser.add_argument("kind", choices=TRAIN_KINDS, help="Model kind to train")
        self.add_output_argument(parser)
        parser.add_argument("--epochs", type=int, default=30, help="Training epochs")
        parser.add_argument("--batch", type=int, default=32, help="Mini-batch size")
        parser.add_argument(
            "--learning-rate", type=float, default=1e-3, help="Initial learning rate"
        )
        parser.add_argument(
            "--seed", type=int, default=0, help="Seed for initialization and batches"
        )
        parser.add_argument(
            "--workers",
            type=int,
            default=settings.NFCE_WORKERS,
            help="Threads computing federated client gradients",
        )
        parser.add_argument(
            "--size-sweep",
            type=str,
            default=None,
            help="rc only: comma separated samples per user, e.g. 500,1000,2000",
        )
        self.add_async_argument(parser)

    def run(self, **options):
        if options["epochs"] < 0 or options["batch"] < 1:
            raise CommandError("--epochs must be >= 0 and --batch >= 1", returncode=1)
        schedule = TrainingSchedule(
            epochs=options["epochs"],
            batch_size=options["batch"],
            learning_rate=options["learning_rate"],
            seed=options["seed"],
        )
        kind, out = options["kind"], self.output_dir(options)

        if options["size_sweep"] is not None:
            if kind != RC:
                raise CommandError("--size-sweep only applies to rc", returncode=1)
            sizes = parse_sizes(options["size_sweep"])
            frame = TrainingService.rc_size_sweep(out, sizes, schedule)
            for row in frame.itertuples():
                self.stdout.write(
                    f"  {row.samples_per_user:>6} samples/user: "
                    f"accuracy {row.accuracy:.3f}"
                )
            self.stdout.write(self.style.SUCCESS("✅ RC size sweep written"))
            return

        if options["run_async"]:
            from apps.experiments.tasks import train_estimator_async

            task = train_estimator_async.delay(
                kind, str(out), dataclasses.asdict(schedule), options["workers"]
            )
            self.stdout.write(
                self.style.SUCCESS(f"📬 Queued {kind} training: {task.id}")
            )
            return

        runs = TrainingService.train(kind, out, schedule, workers=options["workers"])
        for run in runs:
            metric = "val_accuracy" if kind == RC else "val_nmse"
            region = "" if run["region"] is None else f" region {run['region'] + 1}"
            self.stdout.write(
                self.style.SUCCESS(
                    f"✅ {kind}{region}: best {metric} {run[metric]:.4e} "
                    f"→ {run['checkpoint']}"
                )
            )

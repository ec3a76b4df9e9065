from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services import ReportService


class Command(ExperimentCommand):
    help = "Merge evaluation results into a summary CSV and static figures"

    def add_arguments(self, parser):
        self.add_output_argument(parser)

    def run(self, **options):
        report = ReportService.build(self.output_dir(options))
        self.stdout.write(f"📄 {report['summary']}")
        for figure in report["figures"]:
            self.stdout.write(f"📈 {figure}")
        self.stdout.write(self.style.SUCCESS("✅ Report built"))

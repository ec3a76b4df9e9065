import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command, execute_from_command_line
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from apps.experiments.services import RunLayout, read_table
from tests.factories import write_scenario


def run_cli(*argv):
    """Run a command the way manage.py does and return its exit status."""
    with mock.patch("sys.stdout", new=StringIO()), mock.patch(
        "sys.stderr", new=StringIO()
    ):
        try:
            execute_from_command_line(["manage.py", *argv])
        except SystemExit as exc:
            return exc.code
    return 0


class ExitCodeTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = self.tmp.name

    def test_bad_choice_is_user_error(self):
        self.assertEqual(run_cli("train_estimator", "gan", "--out", self.out), 1)
        self.assertEqual(
            run_cli("evaluate_estimators", "--routing", "nearest", "--out", self.out),
            1,
        )

    def test_missing_artifact_is_user_error(self):
        self.assertEqual(run_cli("evaluate_estimators", "--out", self.out), 1)
        self.assertEqual(run_cli("build_report", "--out", self.out), 1)
        self.assertEqual(run_cli("train_estimator", "sr", "--out", self.out), 1)

    def test_empty_snr_grid_is_user_error(self):
        self.assertEqual(
            run_cli("evaluate_estimators", "--out", self.out, "--snr-grid", ""), 1
        )
        self.assertEqual(
            run_cli("evaluate_estimators", "--out", self.out, "--snr-grid", "0,x"), 1
        )

    def test_missing_scenario_is_user_error(self):
        missing = str(Path(self.out) / "nope.scenario")
        self.assertEqual(
            run_cli("generate_datasets", "--scenario", missing, "--out", self.out), 1
        )

    def test_invalid_schedule_is_user_error(self):
        self.assertEqual(
            run_cli("train_estimator", "sr", "--out", self.out, "--batch", "0"), 1
        )

    def test_unexpected_failure_is_internal_error(self):
        with mock.patch(
            "apps.experiments.services.EvaluationService.evaluate",
            side_effect=RuntimeError("boom"),
        ):
            self.assertEqual(run_cli("evaluate_estimators", "--out", self.out), 2)


class ShowComplexityTests(SimpleTestCase):
    def test_tables_match_closed_forms(self):
        out = StringIO()
        call_command("show_complexity", stdout=out)
        text = out.getvalue()
        self.assertIn("RC", text)
        self.assertIn("DRN", text)
        self.assertEqual(text.count("matches"), 2)
        self.assertNotIn("differs", text)

    def test_custom_sizes(self):
        out = StringIO()
        call_command(
            "show_complexity",
            "--slots",
            "16",
            "--regions",
            "2",
            stdout=out,
        )
        self.assertEqual(out.getvalue().count("matches"), 2)


class CommandPipelineTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = self.tmp.name
        self.scenario = str(write_scenario(self.tmp.name))

    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO())
        return out.getvalue()

    def test_generate_train_evaluate_report(self):
        text = self.call(
            "generate_datasets",
            "--scenario",
            self.scenario,
            "--out",
            self.out,
            "--seed",
            "3",
            "--snr-grid",
            "0,5",
        )
        self.assertIn("80/10/10", text)
        layout = RunLayout(Path(self.out))
        manifest = json.loads(layout.manifest_path.read_text())
        self.assertEqual(manifest["seed"], 3)
        self.assertEqual(manifest["snr_grid_db"], ["0.0", "5.0"])

        self.call("train_estimator", "sr", "--out", self.out, "--epochs", "1")
        self.call("train_estimator", "rc", "--out", self.out, "--epochs", "1")
        text = self.call("evaluate_estimators", "--out", self.out)
        self.assertIn("SR-DRN", text)
        results, _ = read_table(layout.result("nmse_vs_snr.csv"))
        self.assertEqual(sorted(results["snr_db"].unique()), [0.0, 5.0])

        text = self.call("build_report", "--out", self.out)
        self.assertIn("summary.csv", text)
        self.assertTrue(layout.report("nmse_vs_snr.png").exists())

    def test_size_sweep(self):
        self.call("generate_datasets", "--scenario", self.scenario, "--out", self.out)
        self.call(
            "train_estimator",
            "rc",
            "--out",
            self.out,
            "--epochs",
            "1",
            "--size-sweep",
            "5,10",
        )
        frame, _ = read_table(RunLayout(Path(self.out)).size_sweep)
        self.assertEqual(list(frame["samples_per_user"]), [5, 10])
        with self.assertRaises(CommandError):
            self.call(
                "train_estimator", "sr", "--out", self.out, "--size-sweep", "5"
            )

    def test_async_flag_queues_task(self):
        with mock.patch(
            "apps.experiments.tasks.generate_datasets_async.delay"
        ) as delay:
            delay.return_value.id = "task-1"
            text = self.call(
                "generate_datasets",
                "--scenario",
                self.scenario,
                "--out",
                self.out,
                "--async",
            )
        self.assertIn("task-1", text)
        args = delay.call_args.args
        self.assertEqual(args[:2], (self.scenario, self.out))
        self.assertFalse(RunLayout(Path(self.out)).manifest_path.exists())

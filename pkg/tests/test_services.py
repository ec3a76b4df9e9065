import json
import shutil
import tempfile
from pathlib import Path

import pandas as pd
from django.test import SimpleTestCase, TestCase

from apps.experiments.models import EvaluationRecord, Experiment, TrainingRun
from apps.experiments.services import (
    ESTIMATORS,
    DatasetService,
    EvaluationService,
    ExperimentManifest,
    ReportService,
    RunLayout,
    TrainingService,
    read_table,
    summarize,
)
from apps.learning.training import TrainingSchedule
from apps.utils.exceptions import ArtifactMissingError, NfceError
from tests.factories import make_scenario

SCHEDULE = TrainingSchedule(epochs=1, batch_size=8, learning_rate=1e-3)


class PipelineTests(TestCase):
    @classmethod
    def setUpTestData(cls):
        cls.root = Path(tempfile.mkdtemp())
        cls.scenario = make_scenario()
        cls.counts = DatasetService.generate(cls.scenario, cls.root)
        TrainingService.train("sr", cls.root, SCHEDULE)
        cls.missing_rc = ""
        try:
            EvaluationService.evaluate(cls.root)
        except ArtifactMissingError as exc:
            cls.missing_rc = str(exc)
        TrainingService.train("rc", cls.root, SCHEDULE)
        TrainingService.train("fl", cls.root, SCHEDULE)
        cls.results = EvaluationService.evaluate(cls.root)
        cls.report = ReportService.build(cls.root)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.root, ignore_errors=True)
        super().tearDownClass()

    def test_datasets_and_manifest(self):
        self.assertEqual(
            (self.counts["train"], self.counts["val"], self.counts["test"]),
            (80, 10, 10),
        )
        layout = RunLayout(self.root)
        manifest = json.loads(layout.manifest_path.read_text())
        self.assertEqual(manifest["manifest_hash"], self.scenario.manifest_hash)
        self.assertEqual(manifest["estimators"], list(ESTIMATORS))
        self.assertEqual(
            layout.scenario_path.read_text(), self.scenario.canonical_text()
        )

    def test_routing_needs_classifier(self):
        self.assertIn("region classifier", self.missing_rc)

    def test_checkpoints_and_curves(self):
        layout = RunLayout(self.root)
        for path in (
            layout.checkpoint("rc"),
            layout.checkpoint("sr", 0),
            layout.checkpoint("sr", 1),
            layout.checkpoint("fl"),
            layout.curve("sr", 1),
            layout.rounds("fl"),
        ):
            self.assertTrue(path.exists(), path)
        rounds, manifest_hash = read_table(layout.rounds("fl"))
        self.assertEqual(manifest_hash, self.scenario.manifest_hash)
        self.assertIn("loss_region2", rounds.columns)

    def test_results_table(self):
        self.assertEqual(len(self.results), 2 * 5)
        self.assertEqual(
            set(self.results["estimator"]), {"LS", "MMSE", "CRLB", "SR-DRN", "FL-DRN"}
        )
        self.assertTrue((self.results["n_samples"] == 10).all())
        path = RunLayout(self.root).result("nmse_vs_snr.csv")
        stored, manifest_hash = read_table(path)
        self.assertEqual(manifest_hash, self.scenario.manifest_hash)
        self.assertEqual(len(stored), len(self.results))

    def test_classifier_and_cross_region_tables(self):
        layout = RunLayout(self.root)
        accuracy, _ = read_table(layout.result("rc_accuracy.csv"))
        self.assertEqual(sorted(accuracy["snr_db"]), [0.0, 10.0])
        self.assertTrue(accuracy["accuracy"].between(0.0, 1.0).all())
        confusion, _ = read_table(layout.result("confusion.csv"))
        self.assertEqual(len(confusion), 2 * 2)
        by_region, _ = read_table(layout.result("nmse_by_region.csv"))
        self.assertEqual(len(by_region), 2 * 2 * 2)

    def test_evaluation_is_reproducible(self):
        again = EvaluationService.evaluate(self.root)
        pd.testing.assert_frame_equal(again, self.results)

    def test_oracle_routing(self):
        frame = EvaluationService.evaluate(self.root, snr_grid=[5.0], routing="oracle")
        self.assertEqual(list(frame["snr_db"].unique()), [5.0])

    def test_report(self):
        layout = RunLayout(self.root)
        summary, _ = read_table(layout.report("summary.csv"))
        self.assertIn("RC accuracy", summary.columns)
        self.assertEqual(list(summary["snr_db"]), [0.0, 10.0])
        for name in ("nmse_vs_snr.png", "learning_curves.png"):
            self.assertTrue(layout.report(name).exists())

    def test_bookkeeping_rows(self):
        experiment = Experiment.objects.get(manifest_hash=self.scenario.manifest_hash)
        self.assertEqual(
            sorted(experiment.training_runs.values_list("kind", flat=True)),
            ["fl", "rc", "sr", "sr"],
        )
        self.assertEqual(
            TrainingRun.objects.filter(kind="sr", region=2).count(), 1
        )
        self.assertEqual(
            EvaluationRecord.objects.filter(experiment=experiment).count(), 10
        )

    def test_rc_size_sweep(self):
        frame = TrainingService.rc_size_sweep(self.root, [10, 5], SCHEDULE)
        self.assertEqual(list(frame["samples_per_user"]), [5, 10])
        self.assertEqual(list(frame["n_train"]), [20, 40])
        self.assertTrue(RunLayout(self.root).size_sweep.exists())


class ServiceErrorTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_missing_datasets(self):
        with self.assertRaises(ArtifactMissingError):
            TrainingService.train("sr", self.root, SCHEDULE)
        with self.assertRaises(ArtifactMissingError):
            EvaluationService.evaluate(self.root)
        with self.assertRaises(ArtifactMissingError):
            ReportService.build(self.root)

    def test_unknown_kind_and_routing(self):
        with self.assertRaises(NfceError):
            TrainingService.train("gan", self.root, SCHEDULE)
        with self.assertRaises(NfceError):
            EvaluationService.evaluate(self.root, routing="nearest")

    def test_manifest_rejects_empty_roster(self):
        with self.assertRaises(NfceError):
            ExperimentManifest("", 0, (0.0,), (), self.root, "abc")
        with self.assertRaises(NfceError):
            ExperimentManifest("", 0, (), ("LS",), self.root, "abc")

    def test_summarize(self):
        row = summarize("LS", 0.0, [1.0, 3.0])
        self.assertEqual(row["nmse_mean"], 2.0)
        self.assertAlmostEqual(row["nmse_stderr"], 1.0)
        self.assertEqual(summarize("LS", 0.0, [2.0])["nmse_stderr"], 0.0)

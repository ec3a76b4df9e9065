"""Desk-scale end-to-end runs. Minutes each; enabled with NFCE_RUN_SLOW=1."""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
from django.conf import settings
from django.test import TestCase

from apps.experiments.scenario import load_scenario
from apps.experiments.services import (
    ESTIMATOR_NAMES,
    DatasetService,
    EvaluationService,
    RunLayout,
    TrainingService,
    read_table,
)
from apps.learning.training import TrainingSchedule

SEEDS = (2024, 2025, 2026)
SNR_GRID = (-10.0, 0.0, 10.0)
SWEEP_SIZES = (500, 1000, 2000, 4000)
# allowed accuracy dip between consecutive sweep sizes
SWEEP_TOLERANCE = 0.01


def mean_nmse(frame, estimator, snr_db):
    rows = frame[(frame["estimator"] == estimator) & (frame["snr_db"] == snr_db)]
    return float(rows["nmse_mean"].iloc[0])


def region_nmse(frame, model_region, data_region, snr_db):
    rows = frame[
        (frame["model_region"] == model_region)
        & (frame["data_region"] == data_region)
        & (frame["snr_db"] == snr_db)
    ]
    return float(rows["nmse_mean"].iloc[0])


@pytest.mark.slow
class DeskScaleTests(TestCase):
    @classmethod
    def setUpTestData(cls):
        base = load_scenario(settings.NFCE_DEFAULT_SCENARIO)
        cls.tmp = Path(tempfile.mkdtemp())
        cls.runs = {}
        for seed in SEEDS:
            root = cls.tmp / f"seed-{seed}"
            scenario = base.with_overrides(seed=seed, snr_grid_db=list(SNR_GRID))
            DatasetService.generate(scenario, root, workers=4)
            schedule = TrainingSchedule(epochs=30, batch_size=32, seed=seed)
            for kind in ("rc", *ESTIMATOR_NAMES):
                TrainingService.train(kind, root, schedule, workers=4)
            routed = EvaluationService.evaluate(root)
            by_region, _ = read_table(RunLayout(root).result("nmse_by_region.csv"))
            accuracy, _ = read_table(RunLayout(root).result("rc_accuracy.csv"))
            cls.runs[seed] = {
                "root": root,
                "routed": routed,
                "by_region": by_region,
                "accuracy": accuracy,
                "schedule": schedule,
            }
        first = cls.runs[SEEDS[0]]
        cls.root = first["root"]
        cls.routed = first["routed"]
        cls.oracle = EvaluationService.evaluate(cls.root, routing="oracle")
        cls.sweep = TrainingService.rc_size_sweep(
            cls.root, SWEEP_SIZES, first["schedule"]
        )

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)
        super().tearDownClass()

    def test_region_classifier_accuracy_at_high_snr(self):
        for seed, run in self.runs.items():
            with self.subTest(seed=seed):
                high = run["accuracy"][run["accuracy"]["snr_db"] >= 10.0]
                self.assertGreaterEqual(high["accuracy"].min(), 0.90)

    def test_region_classifier_improves_with_training_size(self):
        sweep = self.sweep.sort_values("samples_per_user")
        self.assertEqual(sweep["samples_per_user"].tolist(), list(SWEEP_SIZES))
        self.assertTrue(sweep["n_train"].is_monotonic_increasing)
        accuracy = sweep["accuracy"].to_numpy()
        for smaller, larger in zip(accuracy, accuracy[1:]):
            self.assertGreaterEqual(larger, smaller - SWEEP_TOLERANCE, accuracy)
        self.assertTrue(RunLayout(self.root).size_sweep.exists())

    def test_estimator_ordering_for_every_seed(self):
        ordering = ("FL-DRN", "SR-DRN", "MMSE", "LS")
        for seed, run in self.runs.items():
            for snr_db in SNR_GRID:
                with self.subTest(seed=seed, snr_db=snr_db):
                    values = [
                        mean_nmse(run["routed"], name, snr_db) for name in ordering
                    ]
                    for better, worse in zip(values, values[1:]):
                        self.assertLessEqual(better, worse, dict(zip(ordering, values)))

    def test_residual_networks_beat_plain_networks(self):
        pairs = (("SR-DRN", "SR-DRN-nores"), ("FL-DRN", "FL-DRN-nores"))
        for seed, run in self.runs.items():
            for residual, plain in pairs:
                with self.subTest(seed=seed, estimator=residual):
                    self.assertLess(
                        mean_nmse(run["routed"], residual, 10.0),
                        mean_nmse(run["routed"], plain, 10.0),
                    )

    def test_other_region_models_fail_on_region_one(self):
        for seed, run in self.runs.items():
            by_region = run["by_region"]
            for snr_db in SNR_GRID:
                own = region_nmse(by_region, 1, 1, snr_db)
                for model_region in (2, 3):
                    with self.subTest(seed=seed, snr_db=snr_db, model=model_region):
                        self.assertGreater(
                            region_nmse(by_region, model_region, 1, snr_db), own
                        )

    def test_mmse_improves_on_ls(self):
        for snr_db in SNR_GRID:
            with self.subTest(snr_db=snr_db):
                self.assertLessEqual(
                    mean_nmse(self.routed, "MMSE", snr_db),
                    mean_nmse(self.routed, "LS", snr_db),
                )

    def test_routed_close_to_oracle_at_high_snr(self):
        routed = mean_nmse(self.routed, "SR-DRN", 10.0)
        oracle = mean_nmse(self.oracle, "SR-DRN", 10.0)
        self.assertLessEqual(routed, 2.0 * oracle)

    def test_learned_estimators_beat_ls_with_fewer_pilots(self):
        for estimator in ("SR-DRN", "FL-DRN"):
            with self.subTest(estimator=estimator):
                self.assertLess(
                    mean_nmse(self.routed, estimator, 10.0),
                    mean_nmse(self.routed, "LS", 10.0),
                )

    def test_results_finite(self):
        for seed, run in self.runs.items():
            with self.subTest(seed=seed):
                self.assertTrue(np.isfinite(run["routed"]["nmse_mean"]).all())

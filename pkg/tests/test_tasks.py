import tempfile
from unittest import mock

from django.test import TestCase

from apps.experiments.tasks import (
    evaluate_estimators_async,
    generate_datasets_async,
    train_estimator_async,
)
from tests.factories import write_scenario


class ExperimentTaskTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = self.tmp.name

    def test_generate_then_train(self):
        scenario = str(write_scenario(self.out))
        result = generate_datasets_async(scenario, self.out, {"seed": 5})
        self.assertTrue(result["success"])
        self.assertEqual(result["train"], 80)

        result = train_estimator_async(
            "rc", self.out, {"epochs": 1, "batch_size": 8, "learning_rate": 1e-3}
        )
        self.assertTrue(result["success"])
        self.assertEqual(result["runs"][0]["kind"], "rc")

    def test_library_errors_are_reported_not_retried(self):
        result = generate_datasets_async(f"{self.out}/missing.scenario", self.out, {})
        self.assertFalse(result["success"])
        self.assertIn("not found", result["error"])

        result = evaluate_estimators_async(self.out)
        self.assertFalse(result["success"])
        self.assertIn("generate_datasets", result["error"])

        result = train_estimator_async("gan", self.out, {"epochs": 1})
        self.assertFalse(result["success"])

    def test_unexpected_errors_are_retried(self):
        with mock.patch(
            "apps.experiments.services.EvaluationService.evaluate",
            side_effect=RuntimeError("boom"),
        ), mock.patch.object(
            evaluate_estimators_async, "retry", side_effect=RuntimeError("retry")
        ) as retry:
            with self.assertRaisesMessage(RuntimeError, "retry"):
                evaluate_estimators_async(self.out)
        self.assertEqual(retry.call_args.kwargs["countdown"], 1)

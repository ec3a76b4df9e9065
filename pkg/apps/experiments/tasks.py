"""
Celery tasks for long experiment steps
"""

import logging

from celery import shared_task

from apps.experiments.scenario import load_scenario
from apps.experiments.services import (
    DatasetService,
    EvaluationService,
    TrainingService,
)
from apps.learning.training import TrainingSchedule
from apps.utils.exceptions import NfceError

logger = logging.getLogger(__name__)


def _failure(exc: Exception) -> dict:
    return {"success": False, "error": str(exc)}


@shared_task(bind=True, max_retries=3)
def generate_datasets_async(
    self, scenario_path: str, output_dir: str, overrides: dict, workers: int = 1
):
    """
    Generate and persist the train/val/test datasets of a scenario.

    Returns:
        dict: sample counts per split and the manifest hash
    """
    try:
        scenario = load_scenario(scenario_path).with_overrides(**overrides)
        counts = DatasetService.generate(
            scenario, output_dir, workers=workers, scenario_path=scenario_path
        )
        return {"success": True, **counts}
    except NfceError as exc:
        logger.error(f"❌ Dataset generation failed: {exc}")
        return _failure(exc)
    except Exception as exc:
        raise self.retry(exc=exc, countdown=2**self.request.retries)


@shared_task(bind=True, max_retries=3)
def train_estimator_async(
    self, kind: str, output_dir: str, schedule: dict, workers: int = 1
):
    """
    Train one model kind and write its checkpoints.

    Returns:
        dict: one summary per trained checkpoint
    """
    try:
        runs = TrainingService.train(
            kind, output_dir, TrainingSchedule(**schedule), workers=workers
        )
        return {"success": True, "runs": runs}
    except NfceError as exc:
        logger.error(f"❌ Training {kind} failed: {exc}")
        return _failure(exc)
    except Exception as exc:
        raise self.retry(exc=exc, countdown=2**self.request.retries)


@shared_task(bind=True, max_retries=3)
def evaluate_estimators_async(
    self, output_dir: str, snr_grid: list | None = None, routing: str = "rc"
):
    """
    Evaluate every available estimator over the SNR grid.

    Returns:
        dict: number of result rows written
    """
    try:
        frame = EvaluationService.evaluate(output_dir, snr_grid, routing)
        return {"success": True, "rows": len(frame)}
    except NfceError as exc:
        logger.error(f"❌ Evaluation failed: {exc}")
        return _failure(exc)
    except Exception as exc:
        raise self.retry(exc=exc, countdown=2**self.request.retries)

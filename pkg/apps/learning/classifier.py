"""
Region classifier (RC) training and routing of observations to the
single-region estimators.
"""

from __future__ import annotations

import functools
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from sklearn.metrics import confusion_matrix

from apps.learning.kernels import sgd_step
from apps.learning.networks import (
    Network,
    estimate_channels,
    forward,
    pack_observations,
)
from apps.learning.training import (
    BatchSampler,
    TensorShard,
    TrainingResult,
    TrainingSchedule,
    check_finite,
    fit,
)
from apps.utils.exceptions import DatasetError, DimensionError, RoutingError
from apps.utils.seeding import torch_generator

logger = logging.getLogger(__name__)


def region_shard(
    observations: np.ndarray, region_ids: np.ndarray, dtype=torch.float64
) -> TensorShard:
    return TensorShard(
        pack_observations(observations, dtype),
        torch.as_tensor(np.asarray(region_ids), dtype=torch.long),
    )


def rc_accuracy(network: Network, shard: TensorShard) -> float:
    predicted = forward(network, shard.inputs).argmax(dim=1)
    return float((predicted == shard.targets).to(torch.float64).mean())


def train_rc(
    shard: TensorShard,
    network: Network,
    schedule: TrainingSchedule,
    validation: TensorShard | None = None,
) -> TrainingResult:
    """Softmax cross-entropy over region logits; keeps the most accurate epoch."""
    n_regions = network.spec.output_dims[0]
    present = torch.unique(shard.targets)
    if len(present) < 2:
        raise DatasetError(
            f"region classifier needs at least two regions, got {present.tolist()}"
        )
    if int(present.max()) >= n_regions or int(present.min()) < 0:
        raise DimensionError(
            f"region ids {present.tolist()} do not fit {n_regions} logits"
        )
    sampler = BatchSampler(
        len(shard), schedule.batch_size, torch_generator(schedule.seed, "rc")
    )
    logger.info(f"Training RC on {len(shard)} samples from {len(present)} regions")

    def step(net, optimizer, opt_state, epoch, index):
        x, labels = shard.batch(sampler.next_batch())
        optimizer.zero_grad(set_to_none=True)
        loss = F.cross_entropy(net(x), labels)
        value = check_finite(loss, epoch, index)
        loss.backward()
        sgd_step(optimizer, opt_state)
        return {0: value}

    validate = None
    if validation is not None:
        validate = functools.partial(rc_accuracy, shard=validation)
    return fit(
        network,
        step,
        sampler.batches_per_pass,
        schedule,
        validate,
        higher_is_better=True,
        label="RC",
    )


@dataclass(frozen=True)
class ClassificationResult:
    region_ids: np.ndarray
    logits: np.ndarray


def classify(network: Network, observations: np.ndarray) -> ClassificationResult:
    """Predicted region per observation; equal logits resolve to the lowest id."""
    observations = np.atleast_2d(observations)
    n_slots = network.spec.input_dims[1]
    if observations.shape[1] != n_slots:
        raise DimensionError(
            f"RC expects observations of length {n_slots}, "
            f"got {observations.shape[1]}"
        )
    logits = forward(network, pack_observations(observations)).to(torch.float64)
    logits = logits.numpy()
    return ClassificationResult(np.argmax(logits, axis=1), logits)


@dataclass(frozen=True)
class RoutedEstimate:
    estimates: np.ndarray
    region_ids: np.ndarray


def _estimate_by_region(
    models: Mapping[int, Network], observations: np.ndarray, region_ids: np.ndarray
) -> np.ndarray:
    missing = sorted(set(np.unique(region_ids).tolist()) - set(models))
    if missing:
        raise RoutingError(f"no single-region estimator for regions {missing}")
    label_size = next(iter(models.values())).spec.output_dims[0] // 2
    estimates = np.zeros((len(observations), label_size), dtype=np.complex128)
    for region in np.unique(region_ids):
        mask = region_ids == region
        estimates[mask] = estimate_channels(models[int(region)], observations[mask])
    return estimates


def route_and_estimate(
    rc: Network | None, models: Mapping[int, Network], observations: np.ndarray
) -> RoutedEstimate:
    """Estimate each observation with the model of its predicted region.

    Only observations reach this path; with a single model (or no RC) every
    sample goes to that model.
    """
    observations = np.atleast_2d(observations)
    if rc is None or len(models) == 1:
        if len(models) != 1:
            raise RoutingError("routing without a classifier needs exactly one model")
        region = next(iter(models))
        region_ids = np.full(len(observations), region, dtype=np.int64)
    else:
        region_ids = classify(rc, observations).region_ids
    return RoutedEstimate(
        _estimate_by_region(models, observations, region_ids), region_ids
    )


def estimate_with_oracle_routing(
    models: Mapping[int, Network], observations: np.ndarray, region_ids: np.ndarray
) -> RoutedEstimate:
    observations = np.atleast_2d(observations)
    region_ids = np.asarray(region_ids, dtype=np.int64)
    if len(region_ids) != len(observations):
        raise DimensionError(
            f"{len(observations)} observations but {len(region_ids)} region ids"
        )
    return RoutedEstimate(
        _estimate_by_region(models, observations, region_ids), region_ids
    )


@dataclass(frozen=True)
class RoutingReport:
    confusion: np.ndarray
    accuracy: float
    per_region: np.ndarray

    @classmethod
    def from_predictions(
        cls, true_ids: np.ndarray, predicted_ids: np.ndarray, n_regions: int
    ) -> RoutingReport:
        labels = np.arange(n_regions)
        confusion = confusion_matrix(true_ids, predicted_ids, labels=labels)
        totals = confusion.sum(axis=1)
        per_region = np.divide(
            np.diag(confusion),
            totals,
            out=np.full(n_regions, np.nan),
            where=totals > 0,
        )
        accuracy = float(np.trace(confusion) / max(confusion.sum(), 1))
        return cls(confusion, accuracy, per_region)

    def to_frame(self) -> pd.DataFrame:
        n_regions = len(self.per_region)
        frame = pd.DataFrame(
            self.confusion,
            columns=[f"pred_region{r + 1}" for r in range(n_regions)],
        )
        frame.insert(0, "true_region", np.arange(1, n_regions + 1))
        frame["accuracy"] = self.per_region
        return frame


def write_confusion(
    path: str | Path, reports: Mapping[float, RoutingReport], manifest_hash: str
) -> Path:
    """Per-SNR confusion matrices stacked into one CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = []
    for snr_db, report in sorted(reports.items()):
        frame = report.to_frame()
        frame.insert(0, "snr_db", snr_db)
        frames.append(frame)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# manifest_hash={manifest_hash}\n")
        pd.concat(frames, ignore_index=True).to_csv(
            handle, index=False, float_format="%.10g"
        )
    return path

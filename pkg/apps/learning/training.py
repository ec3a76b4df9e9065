"""
Mini-batch SGD training loop shared by single-region (SR), federated (FL)
and region-classifier training.

Every update goes through ``kernels.sgd_step`` with the step-decay schedule,
so the loops differ only in how a gradient is produced for a step.
"""

from __future__ import annotations

import copy
import functools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from apps.learning.kernels import OptimState, make_optimizer, mse_loss, sgd_step
from apps.learning.networks import Network, forward, unpack_labels
from apps.utils.exceptions import DimensionError, TrainingDivergedError
from apps.utils.seeding import torch_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingSchedule:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    decay_period: int = 15
    decay_factor: float = 0.5
    seed: int = 0

    def optim_state(self) -> OptimState:
        return OptimState(
            learning_rate=self.learning_rate,
            decay_period=self.decay_period,
            decay_factor=self.decay_factor,
        )


@dataclass(frozen=True, eq=False)
class TensorShard:
    """Packed network inputs with their regression or class targets."""

    inputs: torch.Tensor
    targets: torch.Tensor

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise DimensionError(
                f"{len(self.inputs)} inputs but {len(self.targets)} targets"
            )

    def __len__(self) -> int:
        return len(self.inputs)

    def batch(self, indices: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.inputs[indices], self.targets[indices]


class BatchSampler:
    """Endless mini-batches over reshuffled passes of a shard.

    A pass yields ``len // batch_size`` full batches (the remainder waits for
    a later pass); shards no larger than one batch are used whole.
    """

    def __init__(self, size: int, batch_size: int, generator: torch.Generator):
        if size < 1:
            raise DimensionError("cannot sample batches from an empty shard")
        self.size = size
        self.batch_size = min(batch_size, size)
        self.generator = generator
        self._order = torch.empty(0, dtype=torch.long)
        self._cursor = 0

    @property
    def batches_per_pass(self) -> int:
        return self.size // self.batch_size

    def next_batch(self) -> torch.Tensor:
        if self._cursor + self.batch_size > len(self._order):
            self._order = torch.randperm(self.size, generator=self.generator)
            self._cursor = 0
        batch = self._order[self._cursor : self._cursor + self.batch_size]
        self._cursor += self.batch_size
        return batch


def client_sampler(
    shard_size: int, schedule: TrainingSchedule, region_id: int, user_id: int
) -> BatchSampler:
    generator = torch_generator(schedule.seed, "client", region_id, user_id)
    return BatchSampler(shard_size, schedule.batch_size, generator)


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    val_metric: float
    learning_rate: float
    region_losses: dict[int, float] = field(default_factory=dict)
    rounds: int = 0


@dataclass
class TrainingResult:
    network: Network
    reports: list[EpochReport]
    best_epoch: int | None
    best_metric: float
    rounds: list = field(default_factory=list)


def check_finite(loss: torch.Tensor, epoch: int, step: int) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        logger.error(f"❌ Loss diverged at epoch {epoch}, step {step}: {value}")
        raise TrainingDivergedError(epoch, step, value)
    return value


def validation_nmse(network: Network, shard: TensorShard) -> float:
    """Mean per-sample NMSE of packed channel estimates."""
    estimates = unpack_labels(forward(network, shard.inputs))
    truths = unpack_labels(shard.targets)
    power = np.sum(np.abs(truths) ** 2, axis=1)
    errors = np.sum(np.abs(estimates - truths) ** 2, axis=1)
    return float(np.mean(errors / np.where(power > 0, power, 1.0)))


StepFn = Callable[[Network, torch.optim.SGD, OptimState, int, int], dict[int, float]]


def fit(
    network: Network,
    step: StepFn,
    steps_per_epoch: int,
    schedule: TrainingSchedule,
    validate: Callable[[Network], float] | None = None,
    higher_is_better: bool = False,
    label: str = "model",
) -> TrainingResult:
    """Run ``schedule.epochs`` epochs of ``steps_per_epoch`` updates each.

    ``step`` performs one update and returns per-region training losses.
    The parameters with the best validation metric are restored at the end.
    """
    opt_state = schedule.optim_state()
    optimizer = make_optimizer(network.parameters(), opt_state)
    reports: list[EpochReport] = []
    best_state = copy.deepcopy(network.state_dict())
    best_epoch: int | None = None
    best_metric = -math.inf if higher_is_better else math.inf

    for epoch in range(schedule.epochs):
        opt_state.epoch = epoch
        losses: dict[int, list[float]] = {}
        for index in range(steps_per_epoch):
            network.train()
            step_losses = step(network, optimizer, opt_state, epoch, index)
            for region, value in step_losses.items():
                losses.setdefault(region, []).append(value)
        region_losses = {region: float(np.mean(v)) for region, v in losses.items()}
        train_loss = float(np.mean(list(region_losses.values())))
        if validate is None:
            metric, improved = math.nan, True
        else:
            metric = validate(network)
            improved = (
                metric > best_metric if higher_is_better else metric < best_metric
            )
        reports.append(
            EpochReport(
                epoch=epoch,
                train_loss=train_loss,
                val_metric=metric,
                learning_rate=opt_state.current_lr,
                region_losses=region_losses,
                rounds=(epoch + 1) * steps_per_epoch,
            )
        )
        if improved:
            best_metric, best_epoch = metric, epoch
            best_state = copy.deepcopy(network.state_dict())
        logger.info(
            f"{label} epoch {epoch + 1}/{schedule.epochs}: loss {train_loss:.4e}, "
            f"val {metric:.4e}, lr {opt_state.current_lr:.2e}"
        )

    network.load_state_dict(best_state)
    network.eval()
    return TrainingResult(network, reports, best_epoch, best_metric)


def train_sr(
    shard: TensorShard,
    network: Network,
    schedule: TrainingSchedule,
    validation: TensorShard | None = None,
    region_id: int = 0,
    sampler: BatchSampler | None = None,
) -> TrainingResult:
    """Train one region's estimator on its pooled data.

    Batches come from the stream of client (region_id, 0), so a one-region,
    one-user federated run sees exactly the same batches.
    """
    sampler = sampler or client_sampler(len(shard), schedule, region_id, 0)

    def step(net, optimizer, opt_state, epoch, index):
        x, y = shard.batch(sampler.next_batch())
        optimizer.zero_grad(set_to_none=True)
        loss = mse_loss(net(x), y)
        value = check_finite(loss, epoch, index)
        loss.backward()
        sgd_step(optimizer, opt_state)
        return {region_id: value}

    validate = None
    if validation is not None:
        validate = functools.partial(validation_nmse, shard=validation)

    return fit(
        network,
        step,
        sampler.batches_per_pass,
        schedule,
        validate,
        label=f"SR region {region_id + 1}",
    )


def write_reports(
    path: str | Path,
    reports: list[EpochReport],
    manifest_hash: str,
    metric_name: str = "val_nmse",
) -> Path:
    """CSV learning curve with a leading provenance comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for report in reports:
        row = {
            "epoch": report.epoch + 1,
            "round": report.rounds,
            "train_loss": report.train_loss,
            metric_name: report.val_metric,
            "learning_rate": report.learning_rate,
        }
        for region, value in sorted(report.region_losses.items()):
            row[f"loss_region{region + 1}"] = value
        rows.append(row)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# manifest_hash={manifest_hash}\n")
        pd.DataFrame(rows).to_csv(handle, index=False, float_format="%.10g")
    return path

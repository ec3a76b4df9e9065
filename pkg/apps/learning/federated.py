"""
Synchronous federated SGD across user regions.

Each round every client (one user of one region) computes the loss gradient
of one local mini-batch at the current global parameters; the server
averages the gradients weighted by client counts and takes one SGD step.
"""

from __future__ import annotations

import copy
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from apps.learning.kernels import OptimState, mse_loss, sgd_step
from apps.learning.networks import Network
from apps.learning.training import (
    BatchSampler,
    TensorShard,
    TrainingResult,
    TrainingSchedule,
    check_finite,
    client_sampler,
    fit,
    validation_nmse,
)
from apps.utils.exceptions import DimensionError, RoundAbortedError

logger = logging.getLogger(__name__)

ClientKey = tuple[int, int]


@dataclass(eq=False)
class ClientState:
    region_id: int
    user_id: int
    shard: TensorShard
    sampler: BatchSampler

    @property
    def key(self) -> ClientKey:
        return (self.region_id, self.user_id)


@dataclass(eq=False)
class ClientUpdate:
    region_id: int
    user_id: int
    gradient: list[torch.Tensor]
    buffers: dict[str, torch.Tensor]
    loss: float
    count: int = 1

    @property
    def key(self) -> ClientKey:
        return (self.region_id, self.user_id)


@dataclass(eq=False)
class ServerState:
    network: Network
    optimizer: torch.optim.SGD
    opt_state: OptimState
    roster: tuple[ClientKey, ...]
    round_index: int = 0

    def __post_init__(self):
        if not self.roster:
            raise DimensionError("federated server needs at least one client")


@dataclass
class RoundReport:
    round_index: int
    region_losses: dict[int, float]
    learning_rate: float
    val_nmse: float = math.nan


def make_clients(
    shards: dict[ClientKey, TensorShard], schedule: TrainingSchedule
) -> list[ClientState]:
    return [
        ClientState(
            region, user, shard, client_sampler(len(shard), schedule, region, user)
        )
        for (region, user), shard in sorted(shards.items())
    ]


def local_gradient(
    client: ClientState,
    network: Network,
    batch: torch.Tensor | None = None,
) -> ClientUpdate:
    """Gradient of the batch loss at the global parameters.

    Works on a private copy, so neither parameters nor batch-norm statistics
    of ``network`` change.
    """
    local = copy.deepcopy(network)
    local.train()
    indices = client.sampler.next_batch() if batch is None else batch
    x, y = client.shard.batch(indices)
    loss = mse_loss(local(x), y)
    parameters = list(local.parameters())
    grads = torch.autograd.grad(loss, parameters, allow_unused=True)
    gradient = [
        torch.zeros_like(p) if g is None else g.detach()
        for p, g in zip(parameters, grads, strict=True)
    ]
    buffers = {name: b.detach().clone() for name, b in local.named_buffers()}
    return ClientUpdate(
        client.region_id, client.user_id, gradient, buffers, float(loss.detach())
    )


def aggregate(server: ServerState, updates: Sequence[ClientUpdate]) -> ServerState:
    """θ ← θ − λ·Σ count·g / Σ count, summed in (region, user) order."""
    received = {update.key: update for update in updates}
    missing = [key for key in server.roster if key not in received]
    if missing:
        logger.error(f"❌ Round {server.round_index} aborted, missing {missing}")
        raise RoundAbortedError(server.round_index, missing)
    ordered = [received[key] for key in sorted(received)]
    total = sum(update.count for update in ordered)
    if total <= 0:
        raise DimensionError("client counts must sum to a positive number")

    parameters = list(server.network.parameters())
    for index, parameter in enumerate(parameters):
        acc = torch.zeros_like(parameter)
        for update in ordered:
            if update.gradient[index].shape != parameter.shape:
                raise DimensionError(
                    f"client {update.key} gradient {index} has shape "
                    f"{tuple(update.gradient[index].shape)}"
                )
            acc = acc + update.count * update.gradient[index]
        parameter.grad = acc / total
    sgd_step(server.optimizer, server.opt_state)

    with torch.no_grad():
        for name, buffer in server.network.named_buffers():
            acc = torch.zeros_like(buffer)
            for update in ordered:
                acc = acc + update.count * update.buffers[name]
            buffer.copy_(acc / total)
    server.round_index += 1
    return server


def train_fl(
    clients: Sequence[ClientState],
    network: Network,
    schedule: TrainingSchedule,
    validation: TensorShard | None = None,
    workers: int = 1,
) -> TrainingResult:
    """Federated training; one epoch spans the largest client's pass."""
    if not clients:
        raise DimensionError("federated training needs at least one client")
    clients = sorted(clients, key=lambda client: client.key)
    roster = tuple(client.key for client in clients)
    rounds: list[RoundReport] = []
    server: ServerState | None = None
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def step(net, optimizer, opt_state, epoch, index):
        nonlocal server
        if server is None:
            server = ServerState(net, optimizer, opt_state, roster)
        if pool is not None:
            updates = list(pool.map(lambda c: local_gradient(c, net), clients))
        else:
            updates = [local_gradient(client, net) for client in clients]
        for update in updates:
            check_finite(torch.tensor(update.loss), epoch, index)
        aggregate(server, updates)
        region_losses = {
            region: float(np.mean([u.loss for u in updates if u.region_id == region]))
            for region in sorted({u.region_id for u in updates})
        }
        rounds.append(
            RoundReport(server.round_index, region_losses, opt_state.current_lr)
        )
        return region_losses

    def validate(net):
        value = validation_nmse(net, validation)
        rounds[-1].val_nmse = value
        return value

    steps_per_epoch = max(client.sampler.batches_per_pass for client in clients)
    try:
        result = fit(
            network,
            step,
            steps_per_epoch,
            schedule,
            validate if validation is not None else None,
            label=f"FL ({len(roster)} clients)",
        )
    finally:
        if pool is not None:
            pool.shutdown()
    result.rounds = rounds
    return result


def write_round_reports(
    path: str | Path, rounds: Sequence[RoundReport], manifest_hash: str
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for report in rounds:
        row = {"round": report.round_index}
        for region, value in sorted(report.region_losses.items()):
            row[f"loss_region{region + 1}"] = value
        row["val_nmse"] = report.val_nmse
        row["learning_rate"] = report.learning_rate
        rows.append(row)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# manifest_hash={manifest_hash}\n")
        pd.DataFrame(rows).to_csv(handle, index=False, float_format="%.10g")
    return path

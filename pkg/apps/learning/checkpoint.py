"""
Parameter checkpoints.

Binary layout (little-endian): magic ``NFCK``, u32 version, u32 tensor count,
then per tensor: u16 name length, UTF-8 name, u32 ndim, u32 dims, float64
values. A JSON sidecar (same stem, ``.json``) carries the ``NetSpec`` and
provenance metadata so a checkpoint is self-describing.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from apps.learning.networks import NetSpec, Network, build_network
from apps.utils.exceptions import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"NFCK"
VERSION = 1


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_checkpoint(
    path: str | Path, network: Network, metadata: dict[str, Any] | None = None
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = network.state_dict()
    chunks = [struct.pack("<4sII", MAGIC, VERSION, len(state))]
    for name, tensor in state.items():
        encoded = name.encode("utf-8")
        values = tensor.detach().cpu().to(torch.float64).numpy()
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack(f"<I{values.ndim}I", values.ndim, *values.shape))
        chunks.append(values.astype("<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    sidecar = {"spec": json.loads(network.spec.to_json()), "metadata": metadata or {}}
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    logger.info(f"💾 Saved {network.spec.name} checkpoint to {path}")
    return path


class _Reader:
    def __init__(self, payload: bytes, path: Path):
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.payload):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        values = struct.unpack_from(fmt, self.payload, self.offset)
        self.offset += size
        return values

    def take_bytes(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        chunk = self.payload[self.offset : self.offset + size]
        self.offset += size
        return chunk


def read_tensors(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    reader = _Reader(path.read_bytes(), path)
    magic, version, count = reader.take("<4sII")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    tensors = {}
    for _ in range(count):
        (name_length,) = reader.take("<H")
        name = reader.take_bytes(name_length).decode("utf-8")
        (ndim,) = reader.take("<I")
        shape = reader.take(f"<{ndim}I")
        size = int(np.prod(shape)) if ndim else 1
        raw = reader.take_bytes(8 * size)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape)
    if reader.offset != len(reader.payload):
        raise CheckpointError(f"{path}: trailing bytes after {count} tensors")
    return tensors


def load_checkpoint(
    path: str | Path, precision: str = "float64"
) -> tuple[Network, dict[str, Any]]:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise CheckpointError(f"checkpoint sidecar not found: {side}")
    sidecar = json.loads(side.read_text())
    spec = NetSpec.from_json(json.dumps(sidecar["spec"]))
    network = build_network(spec, precision=precision)
    tensors = read_tensors(path)
    state = network.state_dict()
    if set(tensors) != set(state):
        raise CheckpointError(
            f"{path}: tensors {sorted(set(tensors) ^ set(state))} do not match "
            f"the {spec.name} architecture"
        )
    for name, target in state.items():
        if tuple(tensors[name].shape) != tuple(target.shape):
            raise CheckpointError(
                f"{path}: {name} has shape {tensors[name].shape}, "
                f"expected {tuple(target.shape)}"
            )
        state[name] = torch.from_numpy(tensors[name].copy()).to(target.dtype)
    network.load_state_dict(state)
    network.eval()
    return network, sidecar.get("metadata", {})

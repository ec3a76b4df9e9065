"""
Region-classifier (RC) and deep-residual estimator (DRN) architectures.

A ``NetSpec`` is an immutable, JSON-serialisable description of a network;
``build_network`` instantiates it as a torch module. Inputs are pilot
observations packed as (batch, 2, Q, 1) with real and imaginary parts in
channels 0 and 1. DRN outputs are channel estimates packed as
[real parts, imaginary parts] of vec(H).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from apps.learning.layers import AvgPool2d, BatchNorm2d, Conv2d, Linear, ReLU
from apps.utils.exceptions import DimensionError
from apps.utils.seeding import torch_generator

logger = logging.getLogger(__name__)

RC = "rc"
DRN = "drn"

RC_CLOSED_FORM_PER_SLOT = 92992
DRN_CLOSED_FORM_PER_ROW = 374208


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class ResidualBlockSpec:
    """Bottleneck 1×1(in→mid), 3×3(mid→mid), 1×1(mid→out) plus a 1×1 skip."""

    in_channels: int
    mid_channels: int
    out_channels: int
    kind: str = "residual"


def conv(in_ch: int, out_ch: int, kernel: int, padding: int = 0) -> LayerSpec:
    return LayerSpec(
        "conv", in_ch, out_ch, (kernel, kernel), (1, 1), (padding, padding)
    )


def bn(channels: int) -> LayerSpec:
    return LayerSpec("bn", channels, channels)


def relu() -> LayerSpec:
    return LayerSpec("relu")


@dataclass(frozen=True)
class NetSpec:
    name: str
    layers: tuple[LayerSpec | ResidualBlockSpec, ...]
    input_dims: tuple[int, int, int]
    output_dims: tuple[int, ...]
    residual: bool = True
    extra: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = asdict(self)
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> NetSpec:
        payload = json.loads(text)
        layers = []
        for item in payload["layers"]:
            if item["kind"] == "residual":
                layers.append(ResidualBlockSpec(**item))
            else:
                for key in ("kernel", "stride", "padding"):
                    item[key] = tuple(item[key])
                layers.append(LayerSpec(**item))
        return cls(
            name=payload["name"],
            layers=tuple(layers),
            input_dims=tuple(payload["input_dims"]),
            output_dims=tuple(payload["output_dims"]),
            residual=payload["residual"],
            extra=payload.get("extra", {}),
        )


def build_rc(n_slots: int, n_regions: int) -> NetSpec:
    if n_slots < 3 or n_regions < 2:
        raise DimensionError(
            f"RC needs Q >= 3 and T >= 2, got Q={n_slots}, T={n_regions}"
        )
    layers: list[LayerSpec | ResidualBlockSpec] = []
    for in_ch, out_ch in ((2, 32), (32, 64), (64, 128)):
        layers += [conv(in_ch, out_ch, 3, padding=1), bn(out_ch), relu()]
    layers += [
        conv(128, 2, 1),
        LayerSpec("linear", 2 * n_slots, n_regions),
    ]
    return NetSpec(
        name=RC,
        layers=tuple(layers),
        input_dims=(2, n_slots, 1),
        output_dims=(n_regions,),
        extra={"n_slots": n_slots, "n_regions": n_regions},
    )


def pooled_height(n_slots: int) -> int:
    return (n_slots + 1) // 2


def build_drn(
    n_slots: int, bs_size: int, irs_size: int, residual: bool = True
) -> NetSpec:
    if n_slots < 3:
        raise DimensionError(f"DRN needs Q >= 3, got {n_slots}")
    label_size = bs_size * (irs_size + 1)
    layers = (
        conv(2, 32, 3, padding=2),
        bn(32),
        relu(),
        ResidualBlockSpec(32, 16, 64),
        ResidualBlockSpec(64, 32, 128),
        ResidualBlockSpec(128, 64, 256),
        conv(256, 2, 1),
        LayerSpec("avgpool", 2, 2, (3, 3), (2, 2)),
        LayerSpec("linear", 2 * pooled_height(n_slots), 2 * label_size),
    )
    return NetSpec(
        name=DRN,
        layers=layers,
        input_dims=(2, n_slots, 1),
        output_dims=(2 * label_size,),
        residual=residual,
        extra={"n_slots": n_slots, "bs_size": bs_size, "irs_size": irs_size},
    )


def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def infer_shapes(spec: NetSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Output shape after each layer, checking channel chaining."""
    shape: tuple[int, ...] = spec.input_dims
    trace = []
    for index, layer in enumerate(spec.layers):
        label = f"{index}:{layer.kind}"
        if isinstance(layer, ResidualBlockSpec) or layer.kind in ("conv", "bn"):
            if shape[0] != layer.in_channels:
                raise DimensionError(
                    f"layer {label} expects {layer.in_channels} channels, "
                    f"gets {shape[0]}"
                )
        if isinstance(layer, ResidualBlockSpec):
            shape = (layer.out_channels, *shape[1:])
        elif layer.kind in ("conv", "avgpool"):
            height, width = (
                _conv_out(
                    shape[1 + axis],
                    layer.kernel[axis],
                    layer.stride[axis],
                    layer.padding[axis],
                )
                for axis in (0, 1)
            )
            if height < 1 or width < 1:
                raise DimensionError(f"layer {label} produces an empty output")
            channels = layer.out_channels if layer.kind == "conv" else shape[0]
            shape = (channels, height, width)
        elif layer.kind == "linear":
            flat = int(np.prod(shape))
            if flat != layer.in_channels:
                raise DimensionError(
                    f"layer {label} expects {layer.in_channels} features, gets {flat}"
                )
            shape = (layer.out_channels,)
        trace.append((label, shape))
    if trace and trace[-1][1] != spec.output_dims:
        raise DimensionError(
            f"{spec.name} ends with {trace[-1][1]}, declared {spec.output_dims}"
        )
    return trace


@dataclass(frozen=True)
class ParamCount:
    weights: int
    biases: int
    norm: int
    per_layer: tuple[tuple[str, int], ...] = ()

    def __int__(self) -> int:
        return self.weights


def _layer_weights(layer: LayerSpec | ResidualBlockSpec) -> tuple[int, int, int]:
    if isinstance(layer, ResidualBlockSpec):
        i, m, o = layer.in_channels, layer.mid_channels, layer.out_channels
        return i * m + 9 * m * m + m * o + i * o, m + m + o + o, 4 * m
    if layer.kind == "conv":
        k = layer.kernel[0] * layer.kernel[1]
        return k * layer.in_channels * layer.out_channels, layer.out_channels, 0
    if layer.kind == "linear":
        return layer.in_channels * layer.out_channels, layer.out_channels, 0
    if layer.kind == "bn":
        return 0, 0, 2 * layer.in_channels
    return 0, 0, 0


def param_count(spec: NetSpec | None) -> ParamCount:
    """Weight products as tabulated; biases and batch-norm terms apart."""
    if spec is None or not spec.layers:
        return ParamCount(0, 0, 0)
    weights = biases = norm = 0
    per_layer = []
    for index, layer in enumerate(spec.layers):
        w, b, n = _layer_weights(layer)
        weights, biases, norm = weights + w, biases + b, norm + n
        if w:
            per_layer.append((f"{index}:{layer.kind}", w))
    return ParamCount(weights, biases, norm, tuple(per_layer))


def rc_closed_form(n_slots: int, n_regions: int) -> int:
    return RC_CLOSED_FORM_PER_SLOT * n_slots + 2 * n_slots * n_regions


def drn_closed_form(n_slots: int, bs_size: int, irs_size: int) -> int:
    return DRN_CLOSED_FORM_PER_ROW * (n_slots + 2) + 4 * bs_size * (
        irs_size + 1
    ) * pooled_height(n_slots)


@dataclass(frozen=True)
class FlopReport:
    total: int
    per_layer: tuple[tuple[str, int], ...]
    closed_form: int | None

    @property
    def matches(self) -> bool:
        return self.closed_form is not None and self.closed_form == self.total


def flops_count(spec: NetSpec) -> FlopReport:
    """Multiplications per forward pass of one sample, conv and linear only."""
    per_layer = []
    for (label, out_shape), layer in zip(infer_shapes(spec), spec.layers, strict=True):
        positions = int(np.prod(out_shape[1:])) if len(out_shape) == 3 else 1
        if isinstance(layer, ResidualBlockSpec):
            w, _, _ = _layer_weights(layer)
            if not spec.residual:
                w -= layer.in_channels * layer.out_channels
            per_layer.append((label, w * positions))
        elif layer.kind in ("conv", "linear"):
            per_layer.append((label, _layer_weights(layer)[0] * positions))
    total = sum(count for _, count in per_layer)
    closed_form = None
    if spec.name == RC:
        closed_form = rc_closed_form(spec.extra["n_slots"], spec.extra["n_regions"])
    elif spec.name == DRN and spec.residual:
        closed_form = drn_closed_form(
            spec.extra["n_slots"], spec.extra["bs_size"], spec.extra["irs_size"]
        )
    return FlopReport(total, tuple(per_layer), closed_form)


class ResidualBlock(nn.Module):
    def __init__(
        self,
        spec: ResidualBlockSpec,
        residual: bool,
        generator: torch.Generator,
        dtype: torch.dtype,
    ):
        super().__init__()
        i, m, o = spec.in_channels, spec.mid_channels, spec.out_channels
        self.residual = residual
        self.main = nn.Sequential(
            Conv2d(i, m, 1, generator=generator, dtype=dtype),
            BatchNorm2d(m, dtype=dtype),
            ReLU(),
            Conv2d(m, m, 3, padding=1, generator=generator, dtype=dtype),
            BatchNorm2d(m, dtype=dtype),
            ReLU(),
            Conv2d(m, o, 1, generator=generator, dtype=dtype),
        )
        # zero-initialised so residual and plain variants start identical
        self.skip = Conv2d(i, o, 1, zero_init=True, dtype=dtype)
        self.out = ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.main(x)
        if self.residual:
            y = y + self.skip(x)
        return self.out(y)


class Network(nn.Module):
    def __init__(self, spec: NetSpec, generator: torch.Generator, dtype: torch.dtype):
        super().__init__()
        infer_shapes(spec)
        self.spec = spec
        modules: list[nn.Module] = []
        for layer in spec.layers:
            if isinstance(layer, ResidualBlockSpec):
                modules.append(ResidualBlock(layer, spec.residual, generator, dtype))
            elif layer.kind == "conv":
                modules.append(
                    Conv2d(
                        layer.in_channels,
                        layer.out_channels,
                        layer.kernel,
                        layer.stride,
                        layer.padding,
                        generator=generator,
                        dtype=dtype,
                    )
                )
            elif layer.kind == "bn":
                modules.append(BatchNorm2d(layer.in_channels, dtype=dtype))
            elif layer.kind == "relu":
                modules.append(ReLU())
            elif layer.kind == "avgpool":
                modules.append(AvgPool2d(layer.kernel[0], layer.stride[0]))
            elif layer.kind == "linear":
                modules.append(
                    Linear(
                        layer.in_channels,
                        layer.out_channels,
                        generator=generator,
                        dtype=dtype,
                    )
                )
            else:
                raise DimensionError(f"unknown layer kind {layer.kind!r}")
        self.layers = nn.Sequential(*modules)

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if tuple(x.shape[1:]) != self.spec.input_dims:
            raise DimensionError(
                f"{self.spec.name} expects inputs (batch, {self.spec.input_dims}), "
                f"got {tuple(x.shape)}"
            )
        return self.layers(x)


def torch_dtype(precision: str) -> torch.dtype:
    return {"float64": torch.float64, "float32": torch.float32}[precision]


def build_network(spec: NetSpec, seed: int = 0, precision: str = "float64") -> Network:
    """Instantiate ``spec`` with weights drawn from the seed's init stream."""
    generator = torch_generator(seed, "init", spec.name)
    return Network(spec, generator, torch_dtype(precision))


def pack_observations(observations: np.ndarray, dtype=torch.float64) -> torch.Tensor:
    """Complex (S, Q) → real (S, 2, Q, 1)."""
    observations = np.atleast_2d(observations)
    stacked = np.stack([observations.real, observations.imag], axis=1)
    return torch.from_numpy(np.ascontiguousarray(stacked[..., np.newaxis])).to(dtype)


def pack_labels(labels: np.ndarray, dtype=torch.float64) -> torch.Tensor:
    """Complex (S, D) → real (S, 2D) as [real parts, imaginary parts]."""
    labels = np.atleast_2d(labels)
    packed = np.concatenate([labels.real, labels.imag], axis=1)
    return torch.from_numpy(np.ascontiguousarray(packed)).to(dtype)


def unpack_labels(packed: torch.Tensor) -> np.ndarray:
    values = packed.detach().to(torch.float64).cpu().numpy()
    half = values.shape[1] // 2
    return values[:, :half] + 1j * values[:, half:]


def forward(network: Network, inputs: torch.Tensor) -> torch.Tensor:
    """Eval-mode forward pass without gradient tracking."""
    network.eval()
    with torch.no_grad():
        return network(inputs.to(network.dtype))


def estimate_channels(
    network: Network, observations: np.ndarray, batch_size: int = 512
) -> np.ndarray:
    """Complex channel estimates (S, D) from complex observations (S, Q)."""
    observations = np.atleast_2d(observations)
    chunks = []
    for start in range(0, len(observations), batch_size):
        batch = pack_observations(observations[start : start + batch_size])
        chunks.append(unpack_labels(forward(network, batch)))
    return np.concatenate(chunks, axis=0)

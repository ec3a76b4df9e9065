"""
``nn.Module`` wrappers around the kernels in ``apps.learning.kernels``.

Weights use fan-in scaled uniform initialisation drawn from an explicit
``torch.Generator``; batch-norm starts at scale 1, shift 0.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from apps.learning import kernels


def _fan_in_uniform_(
    tensor: torch.Tensor, fan_in: int, generator: torch.Generator | None
) -> None:
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=generator)


class Conv2d(nn.Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int | tuple[int, int],
        stride: int = 1,
        padding: int | tuple[int, int] = 0,
        zero_init: bool = False,
        generator: torch.Generator | None = None,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        kernel = kernels._pair(kernel)
        self.stride = kernels._pair(stride)
        self.padding = kernels._pair(padding)
        self.weight = nn.Parameter(
            torch.zeros(out_channels, in_channels, *kernel, dtype=dtype)
        )
        self.bias = nn.Parameter(torch.zeros(out_channels, dtype=dtype))
        if not zero_init:
            fan_in = in_channels * kernel[0] * kernel[1]
            _fan_in_uniform_(self.weight, fan_in, generator)
            _fan_in_uniform_(self.bias, fan_in, generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return kernels.conv2d_forward(
            x, self.weight, self.bias, self.stride, self.padding
        )


class BatchNorm2d(nn.Module):
    def __init__(self, channels: int, dtype: torch.dtype = torch.float64):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels, dtype=dtype))
        self.bias = nn.Parameter(torch.zeros(channels, dtype=dtype))
        self.register_buffer("running_mean", torch.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", torch.ones(channels, dtype=dtype))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return kernels.batch_norm(
            x,
            self.weight,
            self.bias,
            self.running_mean,
            self.running_var,
            training=self.training,
        )


class ReLU(nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return kernels.relu(x)


class AvgPool2d(nn.Module):
    def __init__(self, kernel: int = 3, stride: int = 2):
        super().__init__()
        self.kernel = kernel
        self.stride = stride

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return kernels.avg_pool(x, self.kernel, self.stride)


class Linear(nn.Module):
    """Fully connected head; flattens (batch, C, H, W) inputs."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        generator: torch.Generator | None = None,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(out_features, in_features, dtype=dtype))
        self.bias = nn.Parameter(torch.zeros(out_features, dtype=dtype))
        _fan_in_uniform_(self.weight, in_features, generator)
        _fan_in_uniform_(self.bias, in_features, generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return kernels.linear(x.flatten(1), self.weight, self.bias)

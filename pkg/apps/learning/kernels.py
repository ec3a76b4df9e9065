"""
Differentiable kernels for the estimator networks.

Each kernel is a ``torch.autograd.Function`` whose backward pass is written
out explicitly; ``torch.autograd.gradcheck`` validates them against central
differences in the test-suite. Tensors are (batch, channels, height, width).
Forward inputs are saved on the autograd context, so modifying a parameter
in place between forward and backward makes backward raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch.nn import grad as nn_grad

from apps.utils.exceptions import DimensionError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_SPATIAL = (0, 2, 3)


def _pair(value: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    return (int(value[0]), int(value[1]))


def _check_4d(x: torch.Tensor, name: str) -> None:
    if x.ndim != 4:
        raise DimensionError(f"{name} expects a 4-D tensor, got shape {tuple(x.shape)}")


def conv2d_backward(
    x: torch.Tensor,
    weight: torch.Tensor,
    grad_out: torch.Tensor,
    stride: tuple[int, int],
    padding: tuple[int, int],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Gradients w.r.t. input, weight and bias of a cross-correlation."""
    grad_x = nn_grad.conv2d_input(
        x.shape, weight, grad_out, stride=stride, padding=padding
    )
    grad_w = nn_grad.conv2d_weight(
        x, weight.shape, grad_out, stride=stride, padding=padding
    )
    return grad_x, grad_w, grad_out.sum(dim=_SPATIAL)


class Conv2dFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, weight, bias, stride, padding):
        ctx.save_for_backward(x, weight)
        ctx.stride = stride
        ctx.padding = padding
        ctx.has_bias = bias is not None
        return F.conv2d(x, weight, bias, stride=stride, padding=padding)

    @staticmethod
    def backward(ctx, grad_out):
        x, weight = ctx.saved_tensors
        grad_x, grad_w, grad_b = conv2d_backward(
            x, weight, grad_out, ctx.stride, ctx.padding
        )
        return grad_x, grad_w, grad_b if ctx.has_bias else None, None, None


def conv2d_forward(
    x: torch.Tensor,
    weight: torch.Tensor,
    bias: torch.Tensor | None = None,
    stride: int | tuple[int, int] = 1,
    padding: int | tuple[int, int] = 0,
) -> torch.Tensor:
    _check_4d(x, "conv2d")
    stride, padding = _pair(stride), _pair(padding)
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"conv2d input has {x.shape[1]} channels, kernel expects {weight.shape[1]}"
        )
    for axis in (0, 1):
        extent = x.shape[2 + axis] + 2 * padding[axis] - weight.shape[2 + axis]
        if extent < 0:
            raise DimensionError(
                f"conv2d kernel {tuple(weight.shape[2:])} larger than padded input "
                f"{tuple(x.shape[2:])}"
            )
    return Conv2dFunction.apply(x, weight, bias, stride, padding)


class BatchNormFunction(torch.autograd.Function):
    """Training-mode batch normalisation over (batch, height, width)."""

    @staticmethod
    def forward(ctx, x, gamma, beta, eps):
        mean = x.mean(dim=_SPATIAL, keepdim=True)
        var = x.var(dim=_SPATIAL, unbiased=False, keepdim=True)
        inv_std = torch.rsqrt(var + eps)
        x_hat = (x - mean) * inv_std
        ctx.save_for_backward(x_hat, inv_std, gamma)
        return x_hat * gamma.view(1, -1, 1, 1) + beta.view(1, -1, 1, 1)

    @staticmethod
    def backward(ctx, grad_out):
        x_hat, inv_std, gamma = ctx.saved_tensors
        count = grad_out.numel() / grad_out.shape[1]
        grad_gamma = (grad_out * x_hat).sum(dim=_SPATIAL)
        grad_beta = grad_out.sum(dim=_SPATIAL)
        grad_xhat = grad_out * gamma.view(1, -1, 1, 1)
        grad_x = (inv_std / count) * (
            count * grad_xhat
            - grad_xhat.sum(dim=_SPATIAL, keepdim=True)
            - x_hat * (grad_xhat * x_hat).sum(dim=_SPATIAL, keepdim=True)
        )
        return grad_x, grad_gamma, grad_beta, None


def batch_norm(
    x: torch.Tensor,
    gamma: torch.Tensor,
    beta: torch.Tensor,
    running_mean: torch.Tensor,
    running_var: torch.Tensor,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> torch.Tensor:
    _check_4d(x, "batch_norm")
    if x.shape[1] != gamma.shape[0]:
        raise DimensionError(
            f"batch_norm input has {x.shape[1]} channels, parameters {gamma.shape[0]}"
        )
    if not training:
        shape = (1, -1, 1, 1)
        x_hat = (x - running_mean.view(shape)) * torch.rsqrt(
            running_var.view(shape) + eps
        )
        return x_hat * gamma.view(shape) + beta.view(shape)
    if x.shape[0] < 2:
        raise DimensionError("batch_norm in training mode needs a batch of >= 2")
    out = BatchNormFunction.apply(x, gamma, beta, eps)
    with torch.no_grad():
        running_mean.mul_(1.0 - momentum).add_(momentum * x.mean(dim=_SPATIAL))
        running_var.mul_(1.0 - momentum).add_(
            momentum * x.var(dim=_SPATIAL, unbiased=True)
        )
    return out


class ReluFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x.clamp_min(0.0)

    @staticmethod
    def backward(ctx, grad_out):
        (x,) = ctx.saved_tensors
        return grad_out * (x > 0).to(grad_out.dtype)


def relu(x: torch.Tensor) -> torch.Tensor:
    return ReluFunction.apply(x)


class AvgPoolFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, kernel, stride):
        ctx.input_shape = x.shape
        ctx.kernel = kernel
        ctx.stride = stride
        return F.avg_pool2d(x, kernel, stride)

    @staticmethod
    def backward(ctx, grad_out):
        kernel, stride = ctx.kernel, ctx.stride
        channels = grad_out.shape[1]
        spread = torch.full(
            (channels, 1, *kernel),
            1.0 / (kernel[0] * kernel[1]),
            dtype=grad_out.dtype,
            device=grad_out.device,
        )
        output_padding = tuple(
            ctx.input_shape[2 + axis]
            - ((grad_out.shape[2 + axis] - 1) * stride[axis] + kernel[axis])
            for axis in (0, 1)
        )
        grad_x = F.conv_transpose2d(
            grad_out,
            spread,
            stride=stride,
            groups=channels,
            output_padding=output_padding,
        )
        return grad_x, None, None


def avg_pool(
    x: torch.Tensor,
    kernel: int | tuple[int, int] = 3,
    stride: int | tuple[int, int] = 2,
) -> torch.Tensor:
    _check_4d(x, "avg_pool")
    kernel, stride = _pair(kernel), _pair(stride)
    if x.shape[2] < kernel[0] or x.shape[3] < kernel[1]:
        raise DimensionError(
            f"avg_pool kernel {kernel} larger than input {tuple(x.shape[2:])}"
        )
    return AvgPoolFunction.apply(x, kernel, stride)


class LinearFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, weight, bias):
        ctx.save_for_backward(x, weight)
        return x @ weight.T + bias

    @staticmethod
    def backward(ctx, grad_out):
        x, weight = ctx.saved_tensors
        return grad_out @ weight, grad_out.T @ x, grad_out.sum(dim=0)


def linear(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"linear expects (batch, {weight.shape[1]}), got {tuple(x.shape)}"
        )
    return LinearFunction.apply(x, weight, bias)


class MseLossFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, pred, label):
        residual = pred - label
        ctx.save_for_backward(residual)
        return (residual**2).sum() / pred.shape[0]

    @staticmethod
    def backward(ctx, grad_out):
        (residual,) = ctx.saved_tensors
        grad_pred = grad_out * 2.0 * residual / residual.shape[0]
        grad_label = -grad_pred if ctx.needs_input_grad[1] else None
        return grad_pred, grad_label


def mse_loss(pred: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """Batch mean of squared 2-norms."""
    if pred.shape != label.shape:
        raise DimensionError(
            f"prediction {tuple(pred.shape)} vs label {tuple(label.shape)}"
        )
    return MseLossFunction.apply(pred, label)


@dataclass
class OptimState:
    """Step-decay learning-rate schedule."""

    learning_rate: float = 1e-3
    epoch: int = 0
    decay_period: int = 15
    decay_factor: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(
                f"learning rate must be positive, got {self.learning_rate}"
            )
        if self.decay_period < 1:
            raise ValueError(f"decay period must be >= 1, got {self.decay_period}")

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * self.decay_factor ** (epoch // self.decay_period)

    @property
    def current_lr(self) -> float:
        return self.lr_at(self.epoch)


def make_optimizer(parameters, state: OptimState) -> torch.optim.SGD:
    return torch.optim.SGD(
        parameters, lr=state.current_lr, momentum=0.0, foreach=False
    )


def sgd_step(optimizer: torch.optim.SGD, state: OptimState) -> float:
    """θ ← θ − λ·g at the schedule's current learning rate."""
    lr = state.current_lr
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()
    return lr

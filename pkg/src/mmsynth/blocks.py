"""Shared network primitives.

Pixel-wise feature equalization, exact 2x resampling (element replication /
2x2 mean pooling) and the fade-in blend that mixes a newly grown block's path
with the previous resolution's path.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError, ValidationError


def pixel_equalize(f: torch.Tensor, epsilon: float = 1e-8) -> torch.Tensor:
    """Divide each pixel's channel vector by its RMS (plus epsilon).

    Accepts (C, H, W) or (N, C, H, W); the channel axis is dim -3.
    """
    return f * torch.rsqrt(f.pow(2).mean(dim=-3, keepdim=True) + epsilon)


def _as_batched(f: torch.Tensor) -> tuple[torch.Tensor, bool]:
    if f.dim() == 3:
        return f.unsqueeze(0), True
    if f.dim() == 4:
        return f, False
    raise ShapeError(f"expected a 3D or 4D feature map, got {tuple(f.shape)}")


def upsample2x(f: torch.Tensor) -> torch.Tensor:
    """Replicate every entry into a 2x2 block (doubles H and W)."""
    x, squeeze = _as_batched(f)
    out = F.interpolate(x, scale_factor=2, mode="nearest")
    return out.squeeze(0) if squeeze else out


def downsample2x(f: torch.Tensor) -> torch.Tensor:
    """Average every 2x2 block (halves H and W); requires even H, W."""
    x, squeeze = _as_batched(f)
    if x.shape[-1] % 2 or x.shape[-2] % 2:
        raise ShapeError(f"spatial dims must be even to downsample, got {tuple(f.shape)}")
    out = F.avg_pool2d(x, kernel_size=2)
    return out.squeeze(0) if squeeze else out


def fade_blend(new_path: torch.Tensor, old_path: torch.Tensor, alpha) -> torch.Tensor:
    """alpha * new_path + (1 - alpha) * old_path; exact at both endpoints."""
    if new_path.shape != old_path.shape:
        raise ShapeError(
            f"fade paths must share a shape: {tuple(new_path.shape)} vs {tuple(old_path.shape)}"
        )
    return alpha * new_path + (1.0 - alpha) * old_path


class FadeState(nn.Module):
    """Blend weight for the newest grown block, held in [0, 1].

    The raw scalar is stored unconstrained and clamped on read with a
    straight-through gradient, so a freshly grown stage starts at exactly 0
    while the weight stays optimizable from the boundary.
    """

    def __init__(self, alpha: float = 0.0, trainable: bool = True):
        super().__init__()
        t = torch.tensor(float(alpha))
        if trainable:
            self.raw = nn.Parameter(t)
        else:
            self.register_buffer("raw", t)
        self.trainable = trainable

    @property
    def alpha(self) -> torch.Tensor:
        clamped = self.raw.clamp(0.0, 1.0)
        return self.raw + (clamped - self.raw).detach()

    def value(self) -> float:
        return float(self.alpha.detach())

    def set_(self, value: float):
        with torch.no_grad():
            self.raw.copy_(float(value))

    def extra_repr(self) -> str:
        return f"alpha={self.value():.4f}, trainable={self.trainable}"


class PixelEqualize(nn.Module):
    def __init__(self, epsilon: float = 1e-8):
        super().__init__()
        self.epsilon = epsilon

    def forward(self, x):
        return pixel_equalize(x, self.epsilon)


def make_norm(kind: str, channels: int) -> nn.Module:
    """Normalization applied after each 3x3 convolution.

    `equalize` is the default per-pixel RMS equalization; `batch` and
    `instance` exist for the normalization ablation.
    """
    if kind == "equalize":
        return PixelEqualize()
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    if kind == "instance":
        return nn.InstanceNorm2d(channels)
    raise ValidationError(f"unknown norm kind: {kind!r}")


def _normal_param(shape, init_rng=None) -> nn.Parameter:
    if init_rng is None:
        return nn.Parameter(torch.randn(*shape))
    return nn.Parameter(torch.randn(*shape, generator=init_rng))


class EqualizedLinear(nn.Module):
    """Linear layer with unit-normal init and runtime sqrt(2/fan_in) scaling."""

    def __init__(self, in_features: int, out_features: int, init_rng=None):
        super().__init__()
        self.weight = _normal_param((out_features, in_features), init_rng)
        self.bias = nn.Parameter(torch.zeros(out_features))
        self.scale = math.sqrt(2.0 / in_features)

    def forward(self, x):
        return F.linear(x, self.weight * self.scale, self.bias)


class EqualizedConv2d(nn.Module):
    """Conv layer with unit-normal init, runtime scaling, size-preserving padding."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, init_rng=None):
        super().__init__()
        self.weight = _normal_param(
            (out_channels, in_channels, kernel_size, kernel_size), init_rng
        )
        self.bias = nn.Parameter(torch.zeros(out_channels))
        self.scale = math.sqrt(2.0 / (in_channels * kernel_size * kernel_size))
        self.padding = kernel_size // 2

    def forward(self, x):
        return F.conv2d(x, self.weight * self.scale, self.bias, padding=self.padding)


class ConvUnit(nn.Module):
    """3x3 equalized conv + LeakyReLU(0.2) + per-pixel normalization."""

    def __init__(self, in_channels: int, out_channels: int, norm: str = "equalize", init_rng=None):
        super().__init__()
        self.conv = EqualizedConv2d(in_channels, out_channels, 3, init_rng)
        self.act = nn.LeakyReLU(0.2)
        self.norm = make_norm(norm, out_channels)

    def forward(self, x):
        return self.norm(self.act(self.conv(x)))

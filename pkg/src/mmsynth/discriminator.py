"""Multimodal discriminator.

Mirror of the generator: per-resolution stretch-in modules (one linear 1x1
convolution per modality) map an image into the modality-invariant trunk
width, down-stream blocks descend to 4x4, and two fully-connected heads score
authenticity and estimate the target label.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .blocks import ConvUnit, EqualizedConv2d, EqualizedLinear, FadeState, fade_blend, downsample2x
from .errors import GrowthError, ValidationError
from .generator import GeneratorConfig


@dataclass
class DiscOutput:
    """Per-sample critic scores and label logits."""

    authenticity: torch.Tensor  # (B,)
    label_logits: torch.Tensor  # (B, d_a + c)


class StretchIn(nn.Module):
    """c parallel linear 1x1 convolutions from a 3-channel image to trunk width."""

    def __init__(self, out_channels: int, modalities: int, init_rng=None):
        super().__init__()
        self.branches = nn.ModuleList(
            EqualizedConv2d(3, out_channels, 1, init_rng) for _ in range(modalities)
        )

    def forward(self, image: torch.Tensor, modality: int) -> torch.Tensor:
        return self.branches[modality](image)


class DownStreamBlock(nn.Module):
    """Two 3x3 conv units then 2x2 mean pooling."""

    def __init__(self, in_channels: int, out_channels: int, norm: str, init_rng=None):
        super().__init__()
        self.conv1 = ConvUnit(in_channels, in_channels, norm, init_rng)
        self.conv2 = ConvUnit(in_channels, out_channels, norm, init_rng)

    def forward(self, x):
        return downsample2x(self.conv2(self.conv1(x)))


class Discriminator(nn.Module):
    """Progressive multimodal critic with authentication and estimation heads.

    `blocks[i]` processes features at resolution 4 * 2**(i+1) down to the next
    lower rung; the order mirrors the generator so growth appends on the
    high-resolution side.
    """

    def __init__(self, cfg: GeneratorConfig, init_rng=None):
        super().__init__()
        self.cfg = cfg
        w4 = cfg.width(4)
        self.stretch_ins = nn.ModuleList([StretchIn(w4, cfg.modalities, init_rng)])
        self.blocks = nn.ModuleList()
        self.final = ConvUnit(w4, w4, cfg.norm, init_rng)
        flat = w4 * 4 * 4
        self.head_auth = EqualizedLinear(flat, cfg.critic_units(), init_rng)
        self.head_label = EqualizedLinear(flat, cfg.attr_dim + cfg.modalities, init_rng)
        self.fade: FadeState | None = None
        self.stage = 0

    @property
    def resolution(self) -> int:
        return 4 * (2 ** self.stage)

    def alpha(self) -> float:
        return 1.0 if self.fade is None else self.fade.value()

    def grow(self, init_rng=None) -> "Discriminator":
        """Add one stretch-in and down-stream block on the input side."""
        if self.resolution >= self.cfg.max_resolution:
            raise GrowthError(f"already at max resolution {self.cfg.max_resolution}")
        new_res = self.resolution * 2
        self.stretch_ins.append(StretchIn(self.cfg.width(new_res), self.cfg.modalities, init_rng))
        self.blocks.append(
            DownStreamBlock(self.cfg.width(new_res), self.cfg.width(new_res // 2), self.cfg.norm, init_rng)
        )
        self.fade = FadeState(0.0, trainable=self.cfg.fade_trainable)
        self.stage += 1
        return self

    def forward(self, image: torch.Tensor, modality: int) -> DiscOutput:
        if image.dim() == 3:
            image = image.unsqueeze(0)
        if image.dim() != 4 or image.shape[1] != 3:
            raise ValidationError(f"expected (B, 3, R, R) input, got {tuple(image.shape)}")
        if image.shape[-1] != self.resolution or image.shape[-2] != self.resolution:
            raise ValidationError(
                f"input resolution {tuple(image.shape[-2:])} != current stage {self.resolution}"
            )
        if not 0 <= modality < self.cfg.modalities:
            raise ValidationError(f"modality index {modality} out of range")

        h = self.stretch_ins[self.stage](image, modality)
        for i in range(self.stage - 1, -1, -1):
            h = self.blocks[i](h)
            if i == self.stage - 1 and self.fade is not None:
                old = self.stretch_ins[i](downsample2x(image), modality)
                h = fade_blend(h, old, self.fade.alpha)
        h = self.final(h)
        h = h.flatten(1)
        auth = self.head_auth(h).mean(dim=1)
        return DiscOutput(authenticity=auth, label_logits=self.head_label(h))


def build_discriminator(cfg: GeneratorConfig, init_rng=None) -> Discriminator:
    return Discriminator(cfg, init_rng)


def grow_discriminator(d: Discriminator, init_rng=None) -> Discriminator:
    return d.grow(init_rng)

"""Multimodal generator.

A fully-connected stage maps the (noise, attributes) input code to a 4x4
feature map; transition blocks double the resolution step by step; at the
current resolution a stretch-out head (one 1x1 convolution per modality)
turns the shared trunk features into c images at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .blocks import ConvUnit, EqualizedConv2d, EqualizedLinear, FadeState, fade_blend, upsample2x
from .errors import ConfigError, GrowthError, ValidationError

NOISE_DIM = 512

# trunk feature width at each resolution (full scale); width halves from 16x16 up
FULL_WIDTHS = {4: 512, 8: 512, 16: 256, 32: 128, 64: 64, 128: 32, 256: 16}

# width of the critic head at full scale, before its mean reduction to a scalar
FULL_CRITIC_UNITS = 16


def resolutions_up_to(max_resolution: int) -> list[int]:
    res, out = 4, []
    while res <= max_resolution:
        out.append(res)
        res *= 2
    return out


@dataclass(frozen=True)
class GeneratorConfig:
    """Shared shape configuration for both networks."""

    modalities: int
    attr_dim: int
    max_resolution: int = 256
    width_factor: float = 1.0
    norm: str = "equalize"
    fade_trainable: bool = True
    noise_dim: int = NOISE_DIM

    def __post_init__(self):
        if self.modalities < 1:
            raise ConfigError("modalities must be >= 1")
        if self.attr_dim < 1:
            raise ConfigError("attr_dim must be >= 1")
        if self.max_resolution not in FULL_WIDTHS:
            raise ConfigError(
                f"max_resolution must be a power of two in [4, 256], got {self.max_resolution}"
            )
        if not 0.0 < self.width_factor <= 1.0:
            raise ConfigError("width_factor must lie in (0, 1]")
        if self.noise_dim != NOISE_DIM:
            raise ConfigError(f"noise_dim is fixed at {NOISE_DIM}")

    def width(self, resolution: int) -> int:
        if resolution not in FULL_WIDTHS:
            raise ConfigError(f"no width defined for resolution {resolution}")
        return max(1, round(FULL_WIDTHS[resolution] * self.width_factor))

    def critic_units(self) -> int:
        return max(1, round(FULL_CRITIC_UNITS * self.width_factor))

    @property
    def resolutions(self) -> list[int]:
        return resolutions_up_to(self.max_resolution)


class StretchOut(nn.Module):
    """c parallel linear 1x1 convolutions from trunk features to 3-channel images."""

    def __init__(self, in_channels: int, modalities: int, init_rng=None):
        super().__init__()
        self.branches = nn.ModuleList(
            EqualizedConv2d(in_channels, 3, 1, init_rng) for _ in range(modalities)
        )

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        # (B, W, H, H) -> (B, c, 3, H, H)
        return torch.stack([branch(feat) for branch in self.branches], dim=1)


class TransitionBlock(nn.Module):
    """Upsample 2x then two 3x3 conv units."""

    def __init__(self, in_channels: int, out_channels: int, norm: str, init_rng=None):
        super().__init__()
        self.conv1 = ConvUnit(in_channels, out_channels, norm, init_rng)
        self.conv2 = ConvUnit(out_channels, out_channels, norm, init_rng)

    def forward(self, x):
        return self.conv2(self.conv1(upsample2x(x)))


class Generator(nn.Module):
    """Progressive multimodal generator.

    `stage` indexes the resolutions grown so far (stage 0 is 4x4). During a
    fade-in the previous stage's head output is upsampled and blended with the
    new head's output.
    """

    def __init__(self, cfg: GeneratorConfig, init_rng=None):
        super().__init__()
        self.cfg = cfg
        w4 = cfg.width(4)
        self.mlp = EqualizedLinear(cfg.noise_dim + cfg.attr_dim, w4 * 4 * 4, init_rng)
        self.mlp_act = nn.LeakyReLU(0.2)
        self.initial = ConvUnit(w4, w4, cfg.norm, init_rng)
        self.blocks = nn.ModuleList()
        self.heads = nn.ModuleList([StretchOut(w4, cfg.modalities, init_rng)])
        self.fade: FadeState | None = None
        self.stage = 0

    @property
    def resolution(self) -> int:
        return 4 * (2 ** self.stage)

    def alpha(self) -> float:
        return 1.0 if self.fade is None else self.fade.value()

    def grow(self, init_rng=None) -> "Generator":
        """Add one transition block and stretch-out head; reset fade to 0."""
        if self.resolution >= self.cfg.max_resolution:
            raise GrowthError(f"already at max resolution {self.cfg.max_resolution}")
        new_res = self.resolution * 2
        self.blocks.append(
            TransitionBlock(self.cfg.width(new_res // 2), self.cfg.width(new_res), self.cfg.norm, init_rng)
        )
        self.heads.append(StretchOut(self.cfg.width(new_res), self.cfg.modalities, init_rng))
        self.fade = FadeState(0.0, trainable=self.cfg.fade_trainable)
        self.stage += 1
        return self

    def trunk(self, z: torch.Tensor, y_a: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Shared feature pass; returns (current features, pre-last-block features)."""
        if z.dim() != 2 or z.shape[1] != self.cfg.noise_dim:
            raise ValidationError(f"noise batch must be (B, {self.cfg.noise_dim})")
        if y_a.dim() != 2 or y_a.shape[1] != self.cfg.attr_dim:
            raise ValidationError(f"attribute batch must be (B, {self.cfg.attr_dim})")
        code = torch.cat([z, y_a], dim=1)
        h = self.mlp_act(self.mlp(code))
        h = h.reshape(h.shape[0], self.cfg.width(4), 4, 4)
        h = self.initial(h)
        prev = None
        for block in self.blocks[: self.stage]:
            prev = h
            h = block(h)
        return h, prev

    def forward(self, z: torch.Tensor, y_a: torch.Tensor) -> torch.Tensor:
        """Synthesize all modalities at the current resolution: (B, c, 3, R, R)."""
        h, prev = self.trunk(z, y_a)
        out = self.heads[self.stage](h)
        if self.fade is not None and prev is not None:
            old = self.heads[self.stage - 1](prev)
            old = upsample2x(old.flatten(0, 1)).unflatten(0, old.shape[:2])
            out = fade_blend(out, old, self.fade.alpha)
        return out

    def forward_at_stage(self, z: torch.Tensor, y_a: torch.Tensor, stage: int) -> torch.Tensor:
        """Synthesize with an earlier head (no fade), for reduced-resolution output."""
        if not 0 <= stage <= self.stage:
            raise ValidationError(f"stage {stage} not grown (current {self.stage})")
        code = torch.cat([z, y_a], dim=1)
        h = self.mlp_act(self.mlp(code))
        h = h.reshape(h.shape[0], self.cfg.width(4), 4, 4)
        h = self.initial(h)
        for block in self.blocks[:stage]:
            h = block(h)
        return self.heads[stage](h)


def build_generator(cfg: GeneratorConfig, init_rng=None) -> Generator:
    return Generator(cfg, init_rng)


def grow_generator(g: Generator, init_rng=None) -> Generator:
    return g.grow(init_rng)

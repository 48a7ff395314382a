import copy

import pytest
import torch

from mmsynth.blocks import upsample2x
from mmsynth.errors import ConfigError, GrowthError, ValidationError
from mmsynth.generator import Generator, GeneratorConfig, build_generator, grow_generator


def tiny_cfg(**kw):
    base = dict(modalities=3, attr_dim=3, max_resolution=16, width_factor=1 / 64)
    base.update(kw)
    return GeneratorConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        GeneratorConfig(modalities=0, attr_dim=1)
    with pytest.raises(ConfigError):
        GeneratorConfig(modalities=1, attr_dim=1, max_resolution=6)
    with pytest.raises(ConfigError):
        GeneratorConfig(modalities=1, attr_dim=1, max_resolution=512)
    with pytest.raises(ConfigError):
        GeneratorConfig(modalities=1, attr_dim=1, width_factor=0.0)


def test_width_scaling_recomputed_independently():
    cfg = GeneratorConfig(modalities=3, attr_dim=5, width_factor=0.25)
    full = {4: 512, 8: 512, 16: 256, 32: 128, 64: 64, 128: 32, 256: 16}
    for res, w in full.items():
        assert cfg.width(res) == round(w * 0.25)
    assert cfg.critic_units() == 4


def test_initial_build_shapes_at_4x4():
    g = torch.Generator().manual_seed(0)
    cfg = GeneratorConfig(modalities=3, attr_dim=5)
    gen = build_generator(cfg, g)
    assert gen.mlp.weight.shape == (512 * 4 * 4, 512 + 5)
    assert gen.initial.conv.weight.shape == (512, 512, 3, 3)
    assert len(gen.heads) == 1
    assert len(gen.heads[0].branches) == 3
    for branch in gen.heads[0].branches:
        assert branch.weight.shape == (3, 512, 1, 1)


def test_forward_produces_all_modalities():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g)
    z = torch.randn(2, 512, generator=g)
    y = torch.randn(2, 3, generator=g).clamp(-1, 1)
    out = gen(z, y)
    assert out.shape == (2, 3, 3, 4, 4)
    assert torch.isfinite(out).all()


def test_forward_is_deterministic():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g)
    z = torch.randn(1, 512, generator=g)
    y = torch.zeros(1, 3)
    assert torch.equal(gen(z, y), gen(z, y))


def test_single_modality_degenerates():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(modalities=1), g)
    out = gen(torch.randn(1, 512, generator=g), torch.zeros(1, 3))
    assert out.shape == (1, 1, 3, 4, 4)


def test_input_dimension_errors():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g)
    with pytest.raises(ValidationError):
        gen(torch.randn(1, 100, generator=g), torch.zeros(1, 3))
    with pytest.raises(ValidationError):
        gen(torch.randn(1, 512, generator=g), torch.zeros(1, 5))


def test_grow_doubles_resolution_and_preserves_parameters():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g)
    before = {k: v.clone() for k, v in gen.state_dict().items()}
    grow_generator(gen, g)
    assert gen.resolution == 8
    out = gen(torch.randn(1, 512, generator=g), torch.zeros(1, 3))
    assert out.shape == (1, 3, 3, 8, 8)
    after = gen.state_dict()
    for k, v in before.items():
        assert torch.equal(after[k], v), k


def test_grow_past_max_raises():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(max_resolution=8), g)
    gen.grow(g)
    with pytest.raises(GrowthError):
        gen.grow(g)


def test_growth_chain_reaches_max_with_expected_trunk_widths():
    g = torch.Generator().manual_seed(0)
    cfg = GeneratorConfig(modalities=2, attr_dim=3, max_resolution=256, width_factor=1 / 16)
    gen = build_generator(cfg, g)
    for _ in range(6):
        gen.grow(g)
    assert gen.resolution == 256
    # trunk conv widths per resolution, scaled from 512,512,256,128,64,32,16
    widths = [b.conv2.conv.weight.shape[0] for b in gen.blocks]
    assert widths == [round(w / 16) for w in (512, 256, 128, 64, 32, 16)]


def test_fade_identity_at_alpha_zero():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g)
    z = torch.randn(2, 512, generator=g)
    y = torch.zeros(2, 3)
    low = gen(z, y)
    gen.grow(g)
    assert gen.fade.value() == 0.0
    high = gen(z, y)
    up = upsample2x(low.flatten(0, 1)).unflatten(0, low.shape[:2])
    assert (high - up).abs().max().item() <= 1e-6


def test_output_continuous_in_alpha():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g).grow(g)
    z = torch.randn(1, 512, generator=g)
    y = torch.zeros(1, 3)
    outs = []
    for a in (0.0, 0.5, 1.0):
        gen.fade.set_(a)
        outs.append(gen(z, y))
    mid = (outs[0] + outs[2]) / 2
    assert torch.allclose(outs[1], mid, atol=1e-6)


def test_zeroing_one_head_branch_touches_only_that_modality():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g)
    z = torch.randn(1, 512, generator=g)
    y = torch.zeros(1, 3)
    base = gen(z, y)
    with torch.no_grad():
        gen.heads[0].branches[1].weight.zero_()
        gen.heads[0].branches[1].bias.zero_()
    out = gen(z, y)
    assert torch.equal(out[:, 0], base[:, 0])
    assert torch.equal(out[:, 2], base[:, 2])
    assert not torch.equal(out[:, 1], base[:, 1])
    assert torch.equal(out[:, 1], torch.zeros_like(out[:, 1]))


def test_attribute_gradient_matches_finite_differences():
    g = torch.Generator().manual_seed(0)
    gen = build_generator(tiny_cfg(), g).double()
    z = torch.randn(1, 512, generator=g).double()
    y0 = torch.zeros(1, 3, dtype=torch.float64, requires_grad=True)

    def pixel(yv):
        return gen(z, yv)[0, 0, 0, 1, 2]

    out = pixel(y0)
    (analytic,) = torch.autograd.grad(out, y0)
    h = 1e-3
    fd = torch.zeros(3, dtype=torch.float64)
    for i in range(3):
        e = torch.zeros(1, 3, dtype=torch.float64)
        e[0, i] = h
        fd[i] = (pixel(y0 + e) - pixel(y0 - e)).item() / (2 * h)
    assert analytic.norm() > 0
    denom = fd.abs().clamp_min(1e-8)
    assert ((analytic.flatten() - fd).abs() / denom).max() < 1e-3

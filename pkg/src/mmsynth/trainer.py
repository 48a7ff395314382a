"""Progressive training loop.

Resolution schedule, strict 1:1 alternation of discriminator and generator
updates, fade-in management, per-stage sample grids and checkpointing. One
controller owns all mutable state; the whole trajectory is a deterministic
function of (seed, config, data order).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from .config import TrainConfig
from .data import DatasetManifest, _resize_bilinear, _decode_rgb
from .discriminator import Discriminator, build_discriminator
from .errors import ConfigError, DataError, NumericError, ValidationError
from .generator import Generator, GeneratorConfig, build_generator, resolutions_up_to
from .images import save_png, tile_grid
from .objectives import (
    LossReport,
    LossWeights,
    adversarial_loss,
    classification_loss,
    combine,
    gradient_penalty,
)

ADAM_BETAS = (0.0, 0.99)
ADAM_EPS = 1e-8

# iteration budget per resolution at paper scale; desk runs divide by schedule_scale
BASE_BUDGETS = {4: 48_000, 8: 96_000, 16: 96_000, 32: 96_000, 64: 96_000, 128: 96_000, 256: 200_000}

LOG_HEADER = "# step\tres\talpha\tadv\tgp\tcls_real\tcls_fake\ttotal_D\ttotal_G"


@dataclass(frozen=True)
class StageSpec:
    resolution: int
    budget: int
    fade_fraction: float = 0.5


@dataclass(frozen=True)
class ResolutionSchedule:
    stages: tuple[StageSpec, ...]

    def total_steps(self) -> int:
        return sum(s.budget for s in self.stages)


def make_schedule(max_resolution: int, scale: str = "desk", factor: float = 100.0) -> ResolutionSchedule:
    if max_resolution not in BASE_BUDGETS:
        raise ConfigError(
            f"max_resolution must be a power of two in [4, 256], got {max_resolution}"
        )
    if scale not in ("desk", "paper"):
        raise ConfigError(f"scale must be 'desk' or 'paper', got {scale!r}")
    if factor <= 0:
        raise ConfigError("schedule factor must be > 0")
    stages = []
    for res in resolutions_up_to(max_resolution):
        budget = BASE_BUDGETS[res]
        if scale == "desk":
            budget = max(1, round(budget / factor))
        stages.append(StageSpec(res, budget))
    return ResolutionSchedule(tuple(stages))


class TrainState:
    """Everything the training controller mutates."""

    def __init__(
        self,
        cfg: TrainConfig,
        schema_names: tuple[str, ...],
        modality_names: tuple[str, ...],
        gen: Generator,
        disc: Discriminator,
        opt_g: torch.optim.Optimizer,
        opt_d: torch.optim.Optimizer,
        schedule: ResolutionSchedule,
        rng: np.random.Generator,
        init_rng: torch.Generator,
        stage_index: int = 0,
        step_in_stage: int = 0,
    ):
        self.cfg = cfg
        self.schema_names = tuple(schema_names)
        self.modality_names = tuple(modality_names)
        self.gen = gen
        self.disc = disc
        self.opt_g = opt_g
        self.opt_d = opt_d
        self.schedule = schedule
        self.rng = rng
        self.init_rng = init_rng
        self.stage_index = stage_index
        self.step_in_stage = step_in_stage
        self.weights = LossWeights(cfg.lambda_gp, cfg.lambda_cls)

    @property
    def resolution(self) -> int:
        return self.schedule.stages[self.stage_index].resolution

    @property
    def stage(self) -> StageSpec:
        return self.schedule.stages[self.stage_index]

    def global_step(self) -> int:
        done = sum(s.budget for s in self.schedule.stages[: self.stage_index])
        return done + self.step_in_stage


def generator_config(cfg: TrainConfig) -> GeneratorConfig:
    return GeneratorConfig(
        modalities=cfg.c,
        attr_dim=cfg.d_a,
        max_resolution=cfg.max_resolution,
        width_factor=cfg.width_factor,
        norm=cfg.norm,
        fade_trainable=(cfg.fade == "trainable"),
    )


def _make_optimizer(module: torch.nn.Module, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(
        [p for _, p in module.named_parameters()], lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS
    )


def build_train_state(cfg: TrainConfig, manifest: DatasetManifest) -> TrainState:
    if manifest.c != cfg.c:
        raise ConfigError(f"config c={cfg.c} but manifest has {manifest.c} modalities")
    if manifest.schema.d_a != cfg.d_a:
        raise ConfigError(
            f"config d_a={cfg.d_a} but manifest schema has {manifest.schema.d_a} attributes"
        )
    init_rng = torch.Generator().manual_seed(cfg.seed)
    gcfg = generator_config(cfg)
    gen = build_generator(gcfg, init_rng)
    disc = build_discriminator(gcfg, init_rng)
    schedule = make_schedule(cfg.max_resolution, "desk", cfg.schedule_scale)
    return TrainState(
        cfg,
        manifest.schema.names,
        tuple(manifest.modalities),
        gen,
        disc,
        _make_optimizer(gen, cfg.lr),
        _make_optimizer(disc, cfg.lr),
        schedule,
        np.random.default_rng(cfg.seed),
        init_rng,
    )


def _carry_optimizer(module: torch.nn.Module, old: torch.optim.Optimizer, lr: float):
    """Fresh optimizer over the (possibly grown) parameter set.

    Pre-existing parameters keep their moment estimates; new ones start cold.
    """
    new = _make_optimizer(module, lr)
    for param in new.param_groups[0]["params"]:
        if param in old.state:
            new.state[param] = old.state[param]
    return new


def grow_state(state: TrainState):
    """Advance to the next resolution stage."""
    state.gen.grow(state.init_rng)
    state.disc.grow(state.init_rng)
    state.opt_g = _carry_optimizer(state.gen, state.opt_g, state.cfg.lr)
    state.opt_d = _carry_optimizer(state.disc, state.opt_d, state.cfg.lr)
    state.stage_index += 1
    state.step_in_stage = 0


def _advance_fade(state: TrainState):
    if state.stage_index == 0:
        return
    if state.cfg.fade == "linear":
        stage = state.stage
        ramp = max(1, int(stage.fade_fraction * stage.budget))
        alpha = min(1.0, state.step_in_stage / ramp)
        state.gen.fade.set_(alpha)
        state.disc.fade.set_(alpha)
    # trainable fades are updated by the optimizers themselves


def _noise_batch(state: TrainState, n: int) -> torch.Tensor:
    if state.cfg.noise == "uniform":
        arr = state.rng.random((n, 512), dtype=np.float32) * 2.0 - 1.0
    else:
        arr = state.rng.standard_normal((n, 512), dtype=np.float32)
    return torch.from_numpy(arr)


def train_step(state: TrainState, batch) -> LossReport:
    """One discriminator update then one generator update.

    `batch` is a per-modality list of (images, labels) float32 tensors at the
    current resolution; None marks a modality absent from this step.
    """
    c, d_a = state.cfg.c, state.cfg.d_a
    if len(batch) != c:
        raise ValidationError(f"batch must cover {c} modalities")
    present = [i for i, b in enumerate(batch) if b is not None]
    if not present:
        raise DataError("batch has no modalities")
    res = state.resolution
    for i in present:
        if batch[i][0].shape[-1] != res:
            raise ValidationError(
                f"batch images at {batch[i][0].shape[-1]}px but stage is {res}px"
            )
    n = batch[present[0]][0].shape[0]
    weights = state.weights
    pool = torch.cat([batch[i][1][:, :d_a] for i in present], dim=0)

    # discriminator update
    z = _noise_batch(state, n)
    y = pool[state.rng.integers(0, pool.shape[0], n)]
    with torch.no_grad():
        fakes = state.gen(z, y)
    real_scores: list = [None] * c
    fake_scores: list = [None] * c
    penalties: list = [None] * c
    real_logits: list = [None] * c
    real_labels: list = [None] * c
    for i in present:
        images, labels = batch[i]
        out_real = state.disc(images, i)
        out_fake = state.disc(fakes[:, i], i)
        t = torch.from_numpy(state.rng.random(n, dtype=np.float32))
        real_scores[i] = out_real.authenticity
        fake_scores[i] = out_fake.authenticity
        penalties[i] = gradient_penalty(
            state.disc, images, fakes[:, i], i, weights.lambda_gp, t=t
        )
        real_logits[i] = out_real.label_logits
        real_labels[i] = labels
    adv = adversarial_loss(real_scores, fake_scores, penalties)
    cls_real = classification_loss(real_logits, real_labels, d_a, c)
    total_d = -adv + weights.lambda_cls * cls_real
    state.opt_d.zero_grad(set_to_none=True)
    total_d.backward()
    state.opt_d.step()

    # generator update on fresh noise and attributes from the batch's pool
    z2 = _noise_batch(state, n)
    y2 = pool[state.rng.integers(0, pool.shape[0], n)]
    for p in state.disc.parameters():
        p.requires_grad_(False)
    fakes2 = state.gen(z2, y2)
    gen_scores: list = [None] * c
    fake_logits: list = [None] * c
    fake_labels: list = [None] * c
    for i in present:
        out = state.disc(fakes2[:, i], i)
        gen_scores[i] = out.authenticity
        fake_logits[i] = out.label_logits
        onehot = torch.zeros(n, c)
        onehot[:, i] = 1.0
        fake_labels[i] = torch.cat([y2, onehot], dim=1)
    adv_g = adversarial_loss(
        [s.detach() if s is not None else None for s in real_scores],
        gen_scores,
        [p.detach() if p is not None else None for p in penalties],
    )
    cls_fake = classification_loss(fake_logits, fake_labels, d_a, c)
    total_g = adv_g + weights.lambda_cls * cls_fake
    state.opt_g.zero_grad(set_to_none=True)
    total_g.backward()
    state.opt_g.step()
    for p in state.disc.parameters():
        p.requires_grad_(True)

    state.step_in_stage += 1
    _advance_fade(state)

    report = combine(
        adv.item(), cls_real.item(), cls_fake.item(), weights,
        gp=sum(penalties[i].item() for i in present),
    )
    if not all(np.isfinite(v) for v in report.as_tuple()):
        raise NumericError(f"non-finite loss at step {state.global_step()}: {report}")
    return report


def format_log_line(step: int, res: int, alpha: float, r: LossReport) -> str:
    vals = "\t".join(repr(v) for v in r.as_tuple())
    return f"{step}\t{res}\t{alpha!r}\t{vals}"


class StageData:
    """All images of a manifest preprocessed at one stage resolution.

    Files are decoded once and kept as uint8; each stage only re-runs the
    bilinear resize and affine map, which matches `preprocess` exactly.
    """

    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest
        self._raw: dict[str, list[np.ndarray]] = {
            m: [_decode_rgb(manifest.root / r.path) for r in manifest.records[m]]
            for m in manifest.modalities
        }
        d_a, c = manifest.schema.d_a, manifest.c
        self._labels = {}
        for idx, m in enumerate(manifest.modalities):
            labels = np.zeros((len(manifest.records[m]), d_a + c), dtype=np.float32)
            for j, rec in enumerate(manifest.records[m]):
                labels[j, :d_a] = rec.attributes
                labels[j, d_a + idx] = 1.0
            self._labels[m] = torch.from_numpy(labels)
        self.resolution = None
        self._images: dict[str, torch.Tensor] = {}

    def at_resolution(self, resolution: int):
        if self.resolution == resolution:
            return
        self._images = {}
        for m in self.manifest.modalities:
            if not self._raw[m]:
                raise DataError(f"modality {m!r} has no records")
            stack = np.stack(
                [
                    (_resize_bilinear(raw, resolution) * (2.0 / 255.0) - 1.0).transpose(2, 0, 1)
                    for raw in self._raw[m]
                ]
            ).astype(np.float32)
            self._images[m] = torch.from_numpy(stack)
        self.resolution = resolution

    def draw(self, rng: np.random.Generator, n: int):
        """One per-modality batch, drawn independently per modality."""
        out = []
        for m in self.manifest.modalities:
            images = self._images[m]
            idx = torch.from_numpy(rng.integers(0, images.shape[0], n))
            out.append((images[idx], self._labels[m][idx]))
        return out


def _sample_codes(cfg: TrainConfig, count: int = 8):
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x5A17)))
    if cfg.noise == "uniform":
        z = (rng.random((count, 512)) * 2 - 1).astype(np.float32)
    else:
        z = rng.standard_normal((count, 512)).astype(np.float32)
    attrs = rng.choice(np.array([-1.0, 1.0], dtype=np.float32), size=(count, cfg.d_a))
    return torch.from_numpy(z), torch.from_numpy(attrs)


def render_sample_grid(gen: Generator, z: torch.Tensor, attrs: torch.Tensor) -> np.ndarray:
    """Modalities as rows, the fixed (z, y) pairs as columns."""
    with torch.no_grad():
        out = gen(z, attrs).numpy()
    rows = [[out[k, m] for k in range(out.shape[0])] for m in range(out.shape[1])]
    return tile_grid(rows)


def save_state_checkpoint(state: TrainState, path) -> None:
    meta = ckpt.build_meta(
        state.cfg,
        state.schema_names,
        state.modality_names,
        state.stage_index,
        state.step_in_stage,
        state.rng,
        state.init_rng,
    )
    ckpt.write_checkpoint_file(
        path, meta, ckpt.collect_entries(state.gen, state.disc, state.opt_g, state.opt_d)
    )


def load_state_checkpoint(path) -> TrainState:
    meta, table = ckpt.read_checkpoint_file(path)
    cfg = TrainConfig(**meta["config"])
    gcfg = generator_config(cfg)
    throwaway = torch.Generator().manual_seed(0)
    gen = build_generator(gcfg, throwaway)
    disc = build_discriminator(gcfg, throwaway)
    for _ in range(int(meta["stage_index"])):
        gen.grow(throwaway)
        disc.grow(throwaway)
    ckpt.restore_module("gen", gen, table)
    ckpt.restore_module("disc", disc, table)
    opt_g = _make_optimizer(gen, cfg.lr)
    opt_d = _make_optimizer(disc, cfg.lr)
    ckpt.restore_optimizer("optg", gen, opt_g, table)
    ckpt.restore_optimizer("optd", disc, opt_d, table)
    return TrainState(
        cfg,
        tuple(meta["schema"]),
        tuple(meta["modalities"]),
        gen,
        disc,
        opt_g,
        opt_d,
        make_schedule(cfg.max_resolution, "desk", cfg.schedule_scale),
        ckpt.restore_rng(meta),
        ckpt.restore_init_rng(meta),
        stage_index=int(meta["stage_index"]),
        step_in_stage=int(meta["step_in_stage"]),
    )


def run_progressive_training(cfg: TrainConfig, manifest: DatasetManifest, progress=None):
    """Train through every stage; write logs, sample grids and checkpoints.

    Returns (final checkpoint path, state).
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = build_train_state(cfg, manifest)
    data = StageData(manifest)
    z_fix, y_fix = _sample_codes(cfg)

    log_path = out_dir / "train_log.txt"
    final_path = None
    started = time.monotonic()
    with open(log_path, "w") as log:
        log.write(LOG_HEADER + "\n")
        for k, stage in enumerate(state.schedule.stages):
            if k > 0:
                grow_state(state)
            data.at_resolution(stage.resolution)
            save_png(
                render_sample_grid(state.gen, z_fix, y_fix),
                out_dir / f"samples_{stage.resolution:03d}_start.png",
            )
            for _ in range(stage.budget):
                alpha = state.gen.alpha()
                batch = data.draw(state.rng, cfg.batch)
                report = train_step(state, batch)
                log.write(
                    format_log_line(state.global_step(), stage.resolution, alpha, report) + "\n"
                )
                if progress is not None:
                    progress(state, report)
            save_png(
                render_sample_grid(state.gen, z_fix, y_fix),
                out_dir / f"samples_{stage.resolution:03d}_end.png",
            )
            final_path = out_dir / f"ckpt_{stage.resolution:03d}.a2mf"
            save_state_checkpoint(state, final_path)
    elapsed = time.monotonic() - started
    (out_dir / "train_time.txt").write_text(f"{elapsed:.1f}\n")
    return final_path, state

"""Checkpoint-backed synthesis shared by the CLI and the HTTP service."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .codec import AttributeSchema, AttributeVector, NoiseVector, encode_attributes, sample_noise
from .config import TrainConfig
from .errors import SchemaError, ValidationError
from .generator import Generator, resolutions_up_to
from .trainer import load_state_checkpoint


@dataclass
class ModelBundle:
    """Everything needed to synthesize from a stored checkpoint."""

    gen: Generator
    schema: AttributeSchema
    modalities: tuple[str, ...]
    cfg: TrainConfig
    model_hash: str

    @property
    def max_resolution(self) -> int:
        return self.gen.resolution

    @property
    def resolutions(self) -> list[int]:
        return resolutions_up_to(self.gen.resolution)


def load_bundle(path) -> ModelBundle:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
    state = load_state_checkpoint(path)
    state.gen.eval()
    for p in state.gen.parameters():
        p.requires_grad_(False)
    return ModelBundle(
        gen=state.gen,
        schema=AttributeSchema(state.schema_names),
        modalities=state.modality_names,
        cfg=state.cfg,
        model_hash=digest,
    )


def effective_attributes(bundle: ModelBundle, attributes: dict) -> dict[str, float]:
    """Fill unspecified attributes with the neutral value 0; reject unknowns."""
    unknown = set(attributes) - set(bundle.schema.names)
    if unknown:
        raise SchemaError(f"unknown attributes: {sorted(unknown)}")
    return {n: float(attributes.get(n, 0.0)) for n in bundle.schema.names}


def noise_for_seed(bundle: ModelBundle, seed: int) -> NoiseVector:
    return sample_noise(seed, bundle.cfg.noise)


def synth_images(
    bundle: ModelBundle,
    z: NoiseVector,
    y: AttributeVector,
    resolution: int | None = None,
) -> np.ndarray:
    """All modality images for one code: (c, 3, R, R) in [-1, 1]."""
    gen = bundle.gen
    stage = gen.stage
    if resolution is not None:
        if resolution not in bundle.resolutions:
            raise ValidationError(
                f"resolution {resolution} not available (have {bundle.resolutions})"
            )
        stage = bundle.resolutions.index(resolution)
    zt = torch.from_numpy(z.values).unsqueeze(0)
    yt = torch.from_numpy(y.values).unsqueeze(0)
    with torch.no_grad():
        if stage == gen.stage:
            out = gen(zt, yt)
        else:
            out = gen.forward_at_stage(zt, yt, stage)
    return out[0].numpy()


def synthesize_from_request(
    bundle: ModelBundle,
    attributes: dict,
    seed: int,
    resolution: int | None = None,
) -> tuple[dict[str, float], np.ndarray]:
    """Named-attribute entry point; returns (effective attributes, images)."""
    eff = effective_attributes(bundle, attributes)
    y = encode_attributes(eff, bundle.schema)
    z = noise_for_seed(bundle, seed)
    return eff, synth_images(bundle, z, y, resolution)

"""HTTP synthesis service.

Loads one checkpoint and serves schema discovery, on-demand multimodal
synthesis and interpolation sweeps over JSON with base64 PNG payloads. The
loaded model is immutable, so every request is a pure function of its body
and responses replay exactly from the echoed seed.
"""

from __future__ import annotations

import base64
import secrets
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .codec import encode_attributes, interpolate_attributes, interpolate_noise
from .errors import SchemaError, ValidationError
from .evaluation import sweep_betas
from .images import png_bytes
from .inference import (
    ModelBundle,
    effective_attributes,
    load_bundle,
    noise_for_seed,
    synth_images,
    synthesize_from_request,
)

MAX_SWEEP_STEPS = 33


class SynthesisRequest(BaseModel):
    attributes: dict[str, float] = Field(default_factory=dict)
    seed: Optional[int] = None
    modalities: Optional[list[str]] = None
    resolution: Optional[int] = None


class InterpolateRequest(BaseModel):
    from_code: SynthesisRequest = Field(alias="from")
    to_code: SynthesisRequest = Field(alias="to")
    steps: int
    modalities: Optional[list[str]] = None
    resolution: Optional[int] = None

    model_config = {"populate_by_name": True}


def _select_modalities(bundle: ModelBundle, names: Optional[list[str]]) -> list[int]:
    if names is None:
        return list(range(len(bundle.modalities)))
    unknown = [n for n in names if n not in bundle.modalities]
    if unknown:
        raise HTTPException(status_code=400, detail=f"unknown modalities: {unknown}")
    return [bundle.modalities.index(n) for n in names]


def _check_resolution(bundle: ModelBundle, resolution: Optional[int]) -> Optional[int]:
    if resolution is None:
        return None
    if resolution not in bundle.resolutions:
        raise HTTPException(
            status_code=422,
            detail=f"unsupported resolution {resolution}; available: {bundle.resolutions}",
        )
    return resolution


def _encode_set(bundle: ModelBundle, images, indices: list[int]) -> dict[str, str]:
    return {
        bundle.modalities[i]: base64.b64encode(png_bytes(images[i])).decode("ascii")
        for i in indices
    }


def create_app(checkpoint_path: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="mmsynth synthesis service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.bundle = None

    @app.on_event("startup")
    def _load():
        if checkpoint_path is not None and app.state.bundle is None:
            app.state.bundle = load_bundle(checkpoint_path)

    def bundle_or_503() -> ModelBundle:
        bundle = app.state.bundle
        if bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded yet")
        return bundle

    @app.get("/schema")
    def schema():
        bundle = bundle_or_503()
        return {
            "attributes": list(bundle.schema.names),
            "modalities": list(bundle.modalities),
            "max_resolution": bundle.max_resolution,
            "model_hash": bundle.model_hash,
        }

    def _synthesize(bundle: ModelBundle, req: SynthesisRequest) -> dict:
        indices = _select_modalities(bundle, req.modalities)
        resolution = _check_resolution(bundle, req.resolution)
        seed = req.seed if req.seed is not None else secrets.randbits(63)
        try:
            eff, images = synthesize_from_request(bundle, req.attributes, seed, resolution)
        except (SchemaError, ValidationError) as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        return {
            "images": _encode_set(bundle, images, indices),
            "attributes": eff,
            "seed": seed,
            "model_hash": bundle.model_hash,
        }

    @app.post("/synthesize")
    def synthesize(req: SynthesisRequest):
        return _synthesize(bundle_or_503(), req)

    @app.post("/interpolate")
    def interpolate(req: InterpolateRequest):
        bundle = bundle_or_503()
        if not 2 <= req.steps <= MAX_SWEEP_STEPS:
            raise HTTPException(
                status_code=400, detail=f"steps must lie in [2, {MAX_SWEEP_STEPS}]"
            )
        indices = _select_modalities(bundle, req.modalities)
        resolution = _check_resolution(bundle, req.resolution)
        try:
            eff_from = effective_attributes(bundle, req.from_code.attributes)
            eff_to = effective_attributes(bundle, req.to_code.attributes)
            y_from = encode_attributes(eff_from, bundle.schema)
            y_to = encode_attributes(eff_to, bundle.schema)
        except (SchemaError, ValidationError) as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        seed_from = req.from_code.seed if req.from_code.seed is not None else secrets.randbits(63)
        seed_to = req.to_code.seed if req.to_code.seed is not None else seed_from
        z_from = noise_for_seed(bundle, seed_from)
        z_to = noise_for_seed(bundle, seed_to)

        frames = []
        for beta in sweep_betas(req.steps):
            z = interpolate_noise(z_to, z_from, beta)
            y = interpolate_attributes(y_to, y_from, beta)
            images = synth_images(bundle, z, y, resolution)
            if beta == 0.0:
                seed: Optional[int] = seed_from
            elif beta == 1.0:
                seed = seed_to
            else:
                seed = None
            frames.append(
                {
                    "images": _encode_set(bundle, images, indices),
                    "attributes": {
                        n: float(v) for n, v in zip(bundle.schema.names, y.values)
                    },
                    "seed": seed,
                    "beta": beta,
                    "model_hash": bundle.model_hash,
                }
            )
        return {"frames": frames, "from_seed": seed_from, "to_seed": seed_to}

    return app

"""Multimodal dataset handling.

A manifest is one diffable text file: the ordered modality list (which pins
modality indices), the attribute schema (one name per line), then one record
line per image. Modalities do not need to be paired or equal-sized; sampling
is attribute-conditional and draws with replacement.

A procedural synthetic dataset stands in for real multimodal face data at
desk scale: three binary attributes drive shape, size and brightness of a
simple scene rendered in three modality styles with shared geometry.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .codec import AttributeSchema, ModalityCode, compose_target_label, AttributeVector
from .errors import DataError, SchemaError, ValidationError
from .images import save_png

SYNTH_MODALITIES = ("color", "sketch", "thermal")
SYNTH_ATTRIBUTES = ("round", "large", "bright")


@dataclass
class ManifestRecord:
    path: str  # relative to the manifest root
    attributes: np.ndarray

    def __post_init__(self):
        self.attributes = np.asarray(self.attributes, dtype=np.float32).reshape(-1)


@dataclass
class DatasetManifest:
    root: Path
    modalities: tuple[str, ...]
    schema: AttributeSchema
    records: dict[str, list[ManifestRecord]]

    @property
    def c(self) -> int:
        return len(self.modalities)

    def modality_code(self, name: str) -> ModalityCode:
        if name not in self.modalities:
            raise DataError(f"unknown modality: {name!r}")
        return ModalityCode(self.modalities.index(name), self.c)

    def counts(self) -> dict[str, int]:
        return {m: len(self.records[m]) for m in self.modalities}


def manifest_text(manifest: DatasetManifest) -> str:
    """Canonical serialized form; load(write(m)) round-trips exactly."""
    lines = ["[modalities]"]
    lines += list(manifest.modalities)
    lines.append("[attributes]")
    lines += list(manifest.schema.names)
    lines.append("[records]")
    for m in manifest.modalities:
        for rec in manifest.records[m]:
            vals = " ".join(_fmt_value(v) for v in rec.attributes)
            lines.append(f"{m} {rec.path} {vals}")
    return "\n".join(lines) + "\n"


def _fmt_value(v: float) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(manifest_text(manifest))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    modalities: list[str] = []
    attributes: list[str] = []
    records: dict[str, list[ManifestRecord]] = {}
    section = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in ("[modalities]", "[attributes]", "[records]"):
            section = line[1:-1]
            continue
        if section == "modalities":
            modalities.append(line)
        elif section == "attributes":
            attributes.append(line)
        elif section == "records":
            parts = line.split()
            if len(parts) != 2 + len(attributes):
                raise SchemaError(
                    f"{path}:{lineno}: record needs modality, path and "
                    f"{len(attributes)} attribute values, got {len(parts) - 2}"
                )
            m, rel = parts[0], parts[1]
            if m not in modalities:
                raise DataError(f"{path}:{lineno}: unknown modality {m!r} in record")
            try:
                vals = np.array([float(v) for v in parts[2:]], dtype=np.float32)
            except ValueError as e:
                raise SchemaError(f"{path}:{lineno}: bad attribute value ({e})") from None
            records.setdefault(m, []).append(ManifestRecord(rel, vals))
        else:
            raise DataError(f"{path}:{lineno}: content before any section header")
    if not modalities:
        raise DataError(f"{path}: no modalities declared")
    if not attributes:
        raise SchemaError(f"{path}: no attributes declared")
    for m in modalities:
        records.setdefault(m, [])
    schema = AttributeSchema(tuple(attributes))
    return DatasetManifest(path.parent, tuple(modalities), schema, records)


def _resize_bilinear(u8_hwc: np.ndarray, resolution: int) -> np.ndarray:
    img = Image.fromarray(u8_hwc, mode="RGB")
    if img.size != (resolution, resolution):
        img = img.resize((resolution, resolution), Image.BILINEAR)
    return np.asarray(img, dtype=np.float32)


def _decode_rgb(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, SyntaxError) as e:
        raise DataError(f"cannot decode image {path}: {e}") from None


def preprocess(path, resolution: int) -> np.ndarray:
    """Decode, resize bilinearly to the stage resolution and map to [-1, 1].

    Grayscale files are replicated to 3 channels. Returns (3, R, R) float32.
    """
    hwc = _resize_bilinear(_decode_rgb(path), resolution)
    return (hwc * (2.0 / 255.0) - 1.0).transpose(2, 0, 1).astype(np.float32)


def sample_batch(
    manifest: DatasetManifest,
    modality: ModalityCode | int,
    n: int,
    rng: np.random.Generator,
    resolution: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n records uniformly with replacement from one modality.

    Returns (images (n, 3, R, R), target labels (n, d_a + c)).
    """
    idx = modality.index if isinstance(modality, ModalityCode) else int(modality)
    if not 0 <= idx < manifest.c:
        raise DataError(f"modality index {idx} out of range")
    name = manifest.modalities[idx]
    recs = manifest.records[name]
    if not recs:
        raise DataError(f"modality {name!r} has no records")
    picks = rng.integers(0, len(recs), size=n)
    images = np.stack(
        [preprocess(manifest.root / recs[i].path, resolution) for i in picks]
    )
    code = ModalityCode(idx, manifest.c)
    labels = np.stack(
        [
            compose_target_label(AttributeVector(recs[i].attributes), code).values
            for i in picks
        ]
    )
    return images, labels


# --- synthetic data ---------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Procedural multimodal dataset: attributes drive rendering deterministically."""

    c: int = 3
    d_a: int = 3
    resolution: int = 32
    samples_per_modality: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.c <= len(SYNTH_MODALITIES):
            raise ValidationError(f"c must be in [1, {len(SYNTH_MODALITIES)}]")
        if self.d_a != len(SYNTH_ATTRIBUTES):
            raise ValidationError(f"the synthetic renderer defines exactly {len(SYNTH_ATTRIBUTES)} attributes")
        if self.resolution < 8:
            raise ValidationError("resolution must be >= 8")
        if self.samples_per_modality < 1:
            raise ValidationError("samples_per_modality must be >= 1")


_EDGE_KX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32)
_EDGE_KY = _EDGE_KX.T


def _conv3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    p = np.pad(img, 1)
    out = np.zeros_like(img)
    h, w = img.shape
    for dy in range(3):
        for dx in range(3):
            out += kernel[dy, dx] * p[dy : dy + h, dx : dx + w]
    return out


def render_instance(attrs: np.ndarray, rng: np.random.Generator, resolution: int) -> dict:
    """Render one scene in every modality style from shared geometry.

    attrs[0] > 0 selects a circle (else square), attrs[1] scales the shape,
    attrs[2] scales the foreground brightness. All modalities of one call use
    the same shape mask, so their geometry matches exactly.
    """
    r_attr, l_attr, b_attr = (float(a) for a in np.asarray(attrs, dtype=np.float32))
    R = resolution
    cx = R / 2 + rng.uniform(-0.12, 0.12) * R
    cy = R / 2 + rng.uniform(-0.12, 0.12) * R
    radius = R * (0.20 + 0.05 * l_attr + 0.015 * rng.uniform(-1, 1))
    fg = 0.60 + 0.28 * b_attr + 0.04 * rng.uniform(-1, 1)
    bg = 0.06 + 0.04 * rng.uniform()
    color = 0.55 + 0.45 * rng.uniform(size=3)
    color /= color.max()

    yy, xx = np.mgrid[0:R, 0:R].astype(np.float32) + 0.5
    if r_attr > 0:
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    else:
        half = radius * 0.9
        mask = (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= half)
    maskf = mask.astype(np.float32)

    filled = np.where(mask[None], (fg * color)[:, None, None], bg).astype(np.float32)

    gx = _conv3(maskf, _EDGE_KX)
    gy = _conv3(maskf, _EDGE_KY)
    mag = np.sqrt(gx**2 + gy**2)
    peak = mag.max()
    if peak > 0:
        mag /= peak
    sketch = np.repeat((mag * fg)[None], 3, axis=0).astype(np.float32)

    intensity = np.where(mask, fg, bg).astype(np.float32)
    inv = 1.0 - intensity
    thermal = np.stack([inv, 0.2 + 0.6 * inv, 1.0 - inv]).astype(np.float32)

    out = {
        "color": filled * 2.0 - 1.0,
        "sketch": sketch * 2.0 - 1.0,
        "thermal": thermal * 2.0 - 1.0,
        "mask": mask,
    }
    return out


def generate_synth_dataset(spec: SynthSpec, root) -> DatasetManifest:
    """Render the dataset under `root` and write its manifest.

    Fully seeded: the same spec always produces byte-identical files. Each
    modality draws its own instances, so the modalities are unpaired.
    """
    root = Path(root)
    modalities = SYNTH_MODALITIES[: spec.c]
    records: dict[str, list[ManifestRecord]] = {m: [] for m in modalities}
    for m_idx, m_name in enumerate(modalities):
        (root / "images" / m_name).mkdir(parents=True, exist_ok=True)
        for i in range(spec.samples_per_modality):
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, m_idx, i)))
            attrs = rng.choice(np.array([-1.0, 1.0], dtype=np.float32), size=3)
            rendered = render_instance(attrs, rng, spec.resolution)
            rel = f"images/{m_name}/{i:05d}.png"
            save_png(rendered[m_name], root / rel)
            records[m_name].append(ManifestRecord(rel, attrs))
    manifest = DatasetManifest(
        root, tuple(modalities), AttributeSchema(SYNTH_ATTRIBUTES), records
    )
    write_manifest(manifest, root / "manifest.txt")
    return manifest

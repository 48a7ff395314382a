"""Evaluation metrics and manipulation sweeps.

Frechet distance between Gaussian fits of embedded image sets, pairwise
feature diversity (a stand-in for perceptual pairwise distance; no pretrained
perceptual network is involved), attribute-consistency MSE against the
requested attribute vectors, and the beta sweeps that drive attribute and
noise manipulation figures.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .classifier import AttributeClassifier
from .codec import AttributeVector, NoiseVector, interpolate_attributes, interpolate_noise
from .errors import NumericError, ValidationError
from .generator import Generator


@dataclass
class EmbeddingStats:
    """Mean and covariance of an embedded image set."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        e = self.mu.shape[0]
        if self.sigma.shape != (e, e):
            raise ValidationError(f"covariance must be ({e}, {e}), got {self.sigma.shape}")
        if np.abs(self.sigma - self.sigma.T).max() > 1e-10:
            raise ValidationError("covariance must be symmetric")
        self.sigma = (self.sigma + self.sigma.T) / 2.0


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition, negative eigenvalues clamped."""
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: EmbeddingStats, b: EmbeddingStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})."""
    if a.mu.shape != b.mu.shape:
        raise ValidationError("embedding dimensions differ")
    root_a = _sqrt_psd(a.sigma)
    cross = _sqrt_psd(root_a @ b.sigma @ root_a)
    dist = float(
        np.sum((a.mu - b.mu) ** 2)
        + np.trace(a.sigma)
        + np.trace(b.sigma)
        - 2.0 * np.trace(cross)
    )
    if not np.isfinite(dist):
        raise NumericError("non-finite Frechet distance")
    return max(dist, 0.0)


def embed_images(embed_fn, images, batch: int = 256) -> np.ndarray:
    """Apply an embedding function over images in batches; returns (N, E) float64."""
    if isinstance(images, np.ndarray):
        images = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32))
    feats = []
    with torch.no_grad():
        for start in range(0, images.shape[0], batch):
            feats.append(embed_fn(images[start : start + batch]).double().numpy())
    return np.concatenate(feats)


def embed_and_stats(embed_fn, images, batch: int = 256) -> EmbeddingStats:
    """Mean and unbiased covariance of embedded features."""
    if images.shape[0] < 2:
        raise ValidationError("need at least 2 images for covariance statistics")
    feats = embed_images(embed_fn, images, batch)
    return EmbeddingStats(feats.mean(axis=0), np.cov(feats, rowvar=False))


def pairwise_diversity(
    features: np.ndarray,
    pairs: int,
    rng: np.random.Generator,
    metric: str = "euclidean",
) -> float:
    """Mean distance over random distinct pairs; higher means more diverse."""
    feats = np.asarray(features, dtype=np.float64)
    n = feats.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 feature vectors")
    i = rng.integers(0, n, pairs)
    j = rng.integers(0, n - 1, pairs)
    j = np.where(j >= i, j + 1, j)  # distinct partner
    a, b = feats[i], feats[j]
    if metric == "euclidean":
        d = np.linalg.norm(a - b, axis=1)
    elif metric == "cosine":
        na = np.linalg.norm(a, axis=1).clip(min=1e-12)
        nb = np.linalg.norm(b, axis=1).clip(min=1e-12)
        d = 1.0 - (a * b).sum(axis=1) / (na * nb)
    else:
        raise ValidationError(f"unknown metric: {metric!r}")
    return float(d.mean())


def attribute_mse(
    classifier: AttributeClassifier,
    images,
    requested: np.ndarray,
    *,
    splits: int = 5,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """MSE between predicted and requested attributes, mean +- std over splits.

    The samples are shuffled into `splits` disjoint subsets and the MSE is
    reported as mean and standard deviation across them.
    """
    if isinstance(images, np.ndarray):
        images = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32))
    requested = np.asarray(requested, dtype=np.float32)
    n = images.shape[0]
    if requested.shape[0] != n:
        raise ValidationError("images and requested attribute counts differ")
    if n < splits:
        raise ValidationError(f"need at least {splits} samples for {splits} splits")
    rng = rng or np.random.default_rng(0)
    perm = rng.permutation(n)
    scores = []
    with torch.no_grad():
        preds = []
        for start in range(0, n, 256):
            preds.append(classifier.predict_attributes(images[start : start + 256]).numpy())
        preds = np.concatenate(preds)
    for part in np.array_split(perm, splits):
        scores.append(float(np.mean((preds[part] - requested[part]) ** 2)))
    return float(np.mean(scores)), float(np.std(scores))


def sweep_betas(steps: int) -> list[float]:
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    if steps == 1:
        return [0.0]
    return [k / (steps - 1) for k in range(steps)]


def sweep_codes(
    base_z: NoiseVector,
    base_y: AttributeVector,
    target_z: NoiseVector,
    target_y: AttributeVector,
    steps: int,
) -> list[tuple[NoiseVector, AttributeVector]]:
    """Evenly spaced blend from the base code (beta 0) to the target (beta 1)."""
    codes = []
    for beta in sweep_betas(steps):
        z = interpolate_noise(target_z, base_z, beta)
        y = interpolate_attributes(target_y, base_y, beta)
        codes.append((z, y))
    return codes


def manipulation_sweep(
    gen: Generator,
    base_z: NoiseVector,
    base_y: AttributeVector,
    flip,
    steps: int,
) -> np.ndarray:
    """Render a sweep grid: (steps, c, 3, R, R).

    `flip` is either an attribute index (the slot's value is negated at the
    far end while the noise stays fixed) or a NoiseVector to interpolate
    toward while the attributes stay fixed.
    """
    if isinstance(flip, (int, np.integer)):
        if not 0 <= int(flip) < base_y.d_a:
            raise ValidationError(f"attribute index {flip} out of range")
        target_vals = base_y.values.copy()
        target_vals[int(flip)] = -target_vals[int(flip)]
        target_y = AttributeVector(target_vals)
        target_z = base_z
    elif isinstance(flip, NoiseVector):
        target_y = base_y
        target_z = flip
    else:
        raise ValidationError("flip must be an attribute index or a NoiseVector")

    frames = []
    with torch.no_grad():
        for z, y in sweep_codes(base_z, base_y, target_z, target_y, steps):
            zt = torch.from_numpy(z.values).unsqueeze(0)
            yt = torch.from_numpy(y.values).unsqueeze(0)
            frames.append(gen(zt, yt)[0].numpy())
    return np.stack(frames)


def write_eval_report(out_dir, results: dict) -> tuple[Path, Path]:
    """Plain-text table plus machine-readable key=value file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kv_lines = []
    txt_lines = ["metric\tvalue"]
    for key in sorted(results):
        value = results[key]
        kv_lines.append(f"{key}={value!r}")
        txt_lines.append(f"{key}\t{value}")
    txt_path = out_dir / "eval_report.txt"
    kv_path = out_dir / "eval_report.kv"
    txt_path.write_text("\n".join(txt_lines) + "\n")
    kv_path.write_text("\n".join(kv_lines) + "\n")
    return txt_path, kv_path

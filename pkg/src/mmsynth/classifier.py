"""Small convolutional classifier used by the evaluation harness.

Trained in-repo on real dataset images, it supplies three things: attribute
scores in [-1, 1] for attribute-consistency measurements, modality logits for
checking that generated images land in their intended modality, and a 64-dim
penultimate feature used as the embedding behind the Frechet metric. Beware
that distances over this embedding are not comparable to published scores
computed over large pretrained networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .blocks import EqualizedConv2d, EqualizedLinear
from .data import DatasetManifest, preprocess
from .errors import ValidationError

EMBED_DIM = 64


class AttributeClassifier(nn.Module):
    """Image -> (attribute scores in [-1, 1], modality logits).

    Shape cues live in localized features (corners, curvature), so spatial
    reduction uses max pooling; mean pooling washes them out.
    """

    def __init__(self, attr_dim: int, modalities: int, init_rng=None):
        super().__init__()
        self.attr_dim = attr_dim
        self.modalities = modalities
        self.conv0 = EqualizedConv2d(3, 16, 3, init_rng)
        self.conv1 = EqualizedConv2d(16, 16, 3, init_rng)
        self.conv2 = EqualizedConv2d(16, 32, 3, init_rng)
        self.conv3 = EqualizedConv2d(32, EMBED_DIM, 3, init_rng)
        self.act = nn.LeakyReLU(0.2)
        self.head_attr = EqualizedLinear(EMBED_DIM, attr_dim, init_rng)
        self.head_mod = EqualizedLinear(EMBED_DIM, modalities, init_rng)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        h = self.act(self.conv0(x))
        h = F.max_pool2d(self.act(self.conv1(h)), 2)
        h = F.max_pool2d(self.act(self.conv2(h)), 2)
        h = self.act(self.conv3(h))
        return h.amax(dim=(2, 3))

    def forward(self, x: torch.Tensor):
        feat = self.embed(x)
        return torch.tanh(self.head_attr(feat)), self.head_mod(feat)

    @torch.no_grad()
    def predict_attributes(self, x: torch.Tensor) -> torch.Tensor:
        return self(x)[0]

    @torch.no_grad()
    def predict_modality(self, x: torch.Tensor) -> torch.Tensor:
        return self(x)[1].argmax(dim=1)


@dataclass
class ClassifierMetrics:
    attr_mse: float
    attr_accuracy: float
    modality_accuracy: float


def _load_all(manifest: DatasetManifest, resolution: int):
    images, attrs, mods = [], [], []
    for m_idx, m in enumerate(manifest.modalities):
        for rec in manifest.records[m]:
            images.append(preprocess(manifest.root / rec.path, resolution))
            attrs.append(rec.attributes)
            mods.append(m_idx)
    return (
        torch.from_numpy(np.stack(images)),
        torch.from_numpy(np.stack(attrs).astype(np.float32)),
        torch.from_numpy(np.array(mods, dtype=np.int64)),
    )


def train_attribute_classifier(
    manifest: DatasetManifest,
    resolution: int,
    *,
    seed: int = 0,
    epochs: int = 10,
    batch: int = 64,
    lr: float = 5e-3,
    holdout: float = 0.2,
) -> tuple[AttributeClassifier, ClassifierMetrics]:
    """Train on all modalities jointly; report held-out metrics.

    Deterministic in (manifest, resolution, seed).
    """
    if not 0.0 < holdout < 1.0:
        raise ValidationError("holdout must be in (0, 1)")
    rng = np.random.default_rng(seed)
    init_rng = torch.Generator().manual_seed(seed)
    images, attrs, mods = _load_all(manifest, resolution)
    n = images.shape[0]
    if n < 10:
        raise ValidationError("need at least 10 images to train the classifier")
    perm = rng.permutation(n)
    n_hold = max(1, int(n * holdout))
    hold, train = perm[:n_hold], perm[n_hold:]

    clf = AttributeClassifier(manifest.schema.d_a, manifest.c, init_rng)
    opt = torch.optim.Adam(clf.parameters(), lr=lr)
    for _ in range(epochs):
        order = rng.permutation(len(train))
        for start in range(0, len(order), batch):
            idx = torch.from_numpy(train[order[start : start + batch]])
            feat = clf.embed(images[idx])
            attr_logits = clf.head_attr(feat)
            mod_logits = clf.head_mod(feat)
            loss = F.binary_cross_entropy_with_logits(
                attr_logits, (attrs[idx] + 1.0) / 2.0
            ) + F.cross_entropy(mod_logits, mods[idx])
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()

    clf.eval()
    with torch.no_grad():
        idx = torch.from_numpy(hold)
        scores, logits = clf(images[idx])
        mse = F.mse_loss(scores, attrs[idx]).item()
        attr_acc = (torch.sign(scores) == attrs[idx]).float().mean().item()
        mod_acc = (logits.argmax(dim=1) == mods[idx]).float().mean().item()
    return clf, ClassifierMetrics(mse, attr_acc, mod_acc)

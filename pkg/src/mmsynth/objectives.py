"""Loss terms: Wasserstein critic objective with gradient penalty, target-label
classification on real and generated images, and their combination into the
discriminator and generator totals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import autograd

from .errors import NumericError, ValidationError


@dataclass(frozen=True)
class LossWeights:
    lambda_gp: float = 10.0
    lambda_cls: float = 1.0

    def __post_init__(self):
        if self.lambda_gp < 0 or self.lambda_cls < 0:
            raise ValidationError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossReport:
    """One training step's loss components.

    total_D and total_G are always the compositions
    -adv + lambda_cls * cls_real and adv + lambda_cls * cls_fake of the
    reported components (adv already nets out the gradient penalty).
    """

    adv: float
    gp: float
    cls_real: float
    cls_fake: float
    total_D: float
    total_G: float

    def as_tuple(self):
        return (self.adv, self.gp, self.cls_real, self.cls_fake, self.total_D, self.total_G)


def combine(
    adv: float, cls_real: float, cls_fake: float, w: LossWeights, gp: float = 0.0
) -> LossReport:
    """Compose the two network objectives from their measured parts."""
    return LossReport(
        adv=float(adv),
        gp=float(gp),
        cls_real=float(cls_real),
        cls_fake=float(cls_fake),
        total_D=float(-adv + w.lambda_cls * cls_real),
        total_G=float(adv + w.lambda_cls * cls_fake),
    )


def gradient_penalty(
    disc,
    x_real: torch.Tensor,
    x_fake: torch.Tensor,
    modality: int,
    lambda_gp: float,
    *,
    t: Optional[torch.Tensor] = None,
    rng: Optional[np.random.Generator] = None,
) -> torch.Tensor:
    """Penalty driving the critic's input-gradient norm toward 1.

    One point per sample is drawn uniformly on the line between its real and
    fake image; the penalty is lambda_gp * (||grad|| - 1)^2 averaged over the
    batch. `t` may be passed explicitly (tests); otherwise it is drawn from
    `rng` (training) or torch's default stream.
    """
    if x_real.shape != x_fake.shape:
        raise ValidationError(
            f"real/fake shapes differ: {tuple(x_real.shape)} vs {tuple(x_fake.shape)}"
        )
    b = x_real.shape[0]
    if t is None:
        if rng is not None:
            t = torch.as_tensor(rng.random(b, dtype=np.float64), dtype=x_real.dtype)
        else:
            t = torch.rand(b, dtype=x_real.dtype)
    t = t.reshape(b, *([1] * (x_real.dim() - 1))).to(x_real.dtype)

    x_star = (t * x_real.detach() + (1.0 - t) * x_fake.detach()).requires_grad_(True)
    score = disc(x_star, modality).authenticity.sum()
    (grad,) = autograd.grad(score, x_star, create_graph=True)
    norms = grad.flatten(1).norm(2, dim=1)
    if not torch.isfinite(norms).all():
        raise NumericError("non-finite critic input gradient in penalty term")
    return lambda_gp * ((norms - 1.0) ** 2).mean()


def _renormalize(total: torch.Tensor, present: int, c: int) -> torch.Tensor:
    # with unpaired data a step can lack a modality; keep the sum's scale
    return total * (c / present) if present != c else total


def adversarial_loss(
    real_scores: Sequence[Optional[torch.Tensor]],
    fake_scores: Sequence[Optional[torch.Tensor]],
    penalties: Sequence[Optional[torch.Tensor]],
) -> torch.Tensor:
    """Sum over modalities of mean real score - mean fake score - penalty."""
    c = len(real_scores)
    if len(fake_scores) != c or len(penalties) != c:
        raise ValidationError("per-modality inputs must have equal length")
    terms, present = [], 0
    for r, f, p in zip(real_scores, fake_scores, penalties):
        if r is None or f is None:
            continue
        present += 1
        term = r.mean() - f.mean()
        if p is not None:
            term = term - p
        terms.append(term)
    if present == 0:
        raise ValidationError("no modality present in batch")
    return _renormalize(sum(terms), present, c)


def _label_nll(logits: torch.Tensor, labels: torch.Tensor, d_a: int, c: int) -> torch.Tensor:
    """Per-batch mean of (sum of per-attribute Bernoulli NLL + modality categorical NLL)."""
    if logits.shape[1] != d_a + c or labels.shape[1] != d_a + c:
        raise ValidationError(f"logits/labels must have width d_a + c = {d_a + c}")
    attr_targets = (labels[:, :d_a] + 1.0) / 2.0  # {-1,1} -> {0,1}
    attr_nll = F.binary_cross_entropy_with_logits(
        logits[:, :d_a], attr_targets, reduction="none"
    ).sum(dim=1)
    modality_idx = labels[:, d_a:].argmax(dim=1)
    mod_nll = F.cross_entropy(logits[:, d_a:], modality_idx, reduction="none")
    return (attr_nll + mod_nll).mean()


def classification_loss(
    logits: Sequence[Optional[torch.Tensor]],
    labels: Sequence[Optional[torch.Tensor]],
    d_a: int,
    c: int,
) -> torch.Tensor:
    """Sum over modalities of the expected label negative log-likelihood.

    Attributes are independent binary slots; the modality tail is exclusive.
    The same functional form scores real images (training the estimator) and
    generated images (training the generator).
    """
    if len(logits) != len(labels):
        raise ValidationError("per-modality inputs must have equal length")
    terms, present = [], 0
    for lg, lb in zip(logits, labels):
        if lg is None:
            continue
        present += 1
        terms.append(_label_nll(lg, lb, d_a, c))
    if present == 0:
        raise ValidationError("no modality present in batch")
    return _renormalize(sum(terms), present, len(logits))


# real and fake classification share the functional form; the distinction is
# only which images/labels are fed in
classification_loss_real = classification_loss
classification_loss_fake = classification_loss

"""Perceptual (logit + feature matching) loss and the discriminator objective."""

from __future__ import annotations

import logging

import torch
import torch.nn.functional as F

from codec.training import NonFiniteLossError
from percept.discriminator import MultiScaleSTFTDiscriminator

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


def _match_length(a: torch.Tensor, b: torch.Tensor):
    n = max(a.shape[-1], b.shape[-1])
    return F.pad(a, (0, n - a.shape[-1])), F.pad(b, (0, n - b.shape[-1]))


def perceptual_loss(
    gt: torch.Tensor,
    recon: torch.Tensor,
    disc: MultiScaleSTFTDiscriminator,
    feature_weight: float = 1.0,
) -> torch.Tensor:
    """Squared logit gap averaged over scales plus L1 feature matching.

    Both terms are element means per scale (feature maps: per layer, summed over layers),
    then averaged over scales, so the value is independent of batch size. The shorter
    waveform is zero-padded to the longer one.
    """
    gt, recon = _match_length(gt, recon)
    logits_gt, fmaps_gt = disc(gt)
    logits_rc, fmaps_rc = disc(recon)
    m = len(logits_gt)
    loss = sum((lg - lr).pow(2).mean() for lg, lr in zip(logits_gt, logits_rc)) / m
    if feature_weight:
        feat = 0.0
        for fg, fr in zip(fmaps_gt, fmaps_rc):
            feat = feat + sum((a - b).abs().mean() for a, b in zip(fg, fr))
        loss = loss + feature_weight * feat / m
    return loss


def discriminator_loss(real: torch.Tensor, fake: torch.Tensor, disc: MultiScaleSTFTDiscriminator) -> torch.Tensor:
    """-E[log D(real)] - E[log(1 - D(fake))], averaged over scales."""
    logits_real, _ = disc(real)
    logits_fake, _ = disc(fake)
    total = 0.0
    for lr, lf in zip(logits_real, logits_fake):
        p_real = torch.sigmoid(lr).clamp(PROB_CLAMP, 1 - PROB_CLAMP)
        p_fake = torch.sigmoid(lf).clamp(PROB_CLAMP, 1 - PROB_CLAMP)
        total = total - torch.log(p_real).mean() - torch.log(1 - p_fake).mean()
    loss = total / len(logits_real)
    if not torch.isfinite(loss):
        raise NonFiniteLossError(f"non-finite discriminator loss {float(loss)}", {"disc": float(loss)})
    return loss


def disc_update(
    real: torch.Tensor,
    fake: torch.Tensor,
    disc: MultiScaleSTFTDiscriminator,
    optimizer: torch.optim.Optimizer,
) -> float:
    """One step on the discriminator; `fake` is detached so generator weights stay untouched."""
    optimizer.zero_grad(set_to_none=True)
    loss = discriminator_loss(real.detach(), fake.detach(), disc)
    loss.backward()
    optimizer.step()
    return float(loss)

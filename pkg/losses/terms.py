"""Task-agnostic loss terms over packed spectrogram tensors and encoder latents."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Sequence

import torch

logger = logging.getLogger(__name__)

MSE_FLOOR = 1e-12
SNR_FLOOR_DB = -120.0


@dataclass
class LatentBlock:
    vectors: List[torch.Tensor]                 # one B x v_i tensor per source group
    source_ids: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.source_ids:
            self.source_ids = list(range(len(self.vectors)))
        if len(self.source_ids) != len(self.vectors):
            raise ValueError(f"{len(self.vectors)} latents for source ids {self.source_ids}")

    @property
    def widths(self) -> List[int]:
        return [int(v.shape[-1]) for v in self.vectors]

    @property
    def width(self) -> int:
        return sum(self.widths)

    def concat(self) -> torch.Tensor:
        return torch.cat(self.vectors, dim=-1)

    def by_source(self) -> dict:
        return dict(zip(self.source_ids, self.vectors))


def _same_shape(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def mse_loss(x_gt: torch.Tensor, x_dec: torch.Tensor) -> torch.Tensor:
    """Half the summed squared error per item, averaged over the batch."""
    _same_shape(x_gt, x_dec)
    per_item = (x_gt - x_dec).pow(2).flatten(1).sum(dim=1)
    return 0.5 * per_item.mean()


def mean_squared_error(x_gt: torch.Tensor, x_dec: torch.Tensor) -> torch.Tensor:
    _same_shape(x_gt, x_dec)
    return (x_gt - x_dec).pow(2).mean()


def channel_mse(x_gt: torch.Tensor, x_dec: torch.Tensor) -> dict:
    """Element-mean squared error per packed channel (magnitude, phase)."""
    _same_shape(x_gt, x_dec)
    err = (x_gt - x_dec).pow(2)
    return {"mag": err[:, 0].mean(), "phase": err[:, 1].mean()}


def cosine_correlation_loss(latents: LatentBlock) -> torch.Tensor:
    """Mean |cos(z_i, z_j)| over distinct source pairs and batch items.

    Minimising it decorrelates the sources. Pairs with a zero-norm vector count as 0.
    """
    vectors = latents.vectors
    if len(vectors) < 2:
        raise ValueError(f"need at least 2 sources, got {len(vectors)}")
    values = []
    degenerate = 0
    for zi, zj in combinations(vectors, 2):
        if zi.shape != zj.shape:
            raise ValueError(f"latent widths differ: {tuple(zi.shape)} vs {tuple(zj.shape)}")
        ni, nj = zi.norm(dim=-1), zj.norm(dim=-1)
        ok = (ni > 0) & (nj > 0)
        degenerate += int((~ok).sum())
        denom = torch.where(ok, ni * nj, torch.ones_like(ni))
        cos = torch.where(ok, (zi * zj).sum(dim=-1) / denom, torch.zeros_like(ni))
        values.append(cos.abs())
    if degenerate:
        logger.warning("Zero-norm latent in %d pair(s); counted as uncorrelated", degenerate)
    return torch.stack(values).mean()


def spectral_snr_loss(x_gt: torch.Tensor, x_dec: torch.Tensor) -> torch.Tensor:
    """Error-to-signal energy ratio in dB (lower is better), clamped at -120 dB."""
    _same_shape(x_gt, x_dec)
    signal = x_gt.pow(2).mean()
    if float(signal) == 0.0:
        raise ValueError("ground truth is all zero; spectral SNR undefined")
    ratio = (x_gt - x_dec).pow(2).mean() / signal
    return 10.0 * torch.log10(ratio.clamp_min(10 ** (SNR_FLOOR_DB / 10)))


def psnr_loss(x_gt: torch.Tensor, x_dec: torch.Tensor, x_max: float) -> torch.Tensor:
    mse = mean_squared_error(x_gt, x_dec).clamp_min(MSE_FLOOR)
    return -10.0 * torch.log10(torch.as_tensor(x_max, dtype=mse.dtype) ** 2 / mse)


def psnr_metric(x_gt: torch.Tensor, x_dec: torch.Tensor, x_max: float) -> float:
    return float(-psnr_loss(x_gt, x_dec, x_max))


def nuclear_norm_penalty(z: torch.Tensor) -> torch.Tensor:
    if z.ndim != 2:
        raise ValueError(f"nuclear norm needs a 2-D matrix, got {tuple(z.shape)}")
    return torch.linalg.matrix_norm(z, ord="nuc")


def psnr_cap(x_max: float) -> float:
    """PSNR reported for a perfect reconstruction."""
    return 10.0 * math.log10(x_max ** 2 / MSE_FLOOR)


def peak_value(tensors: Sequence[torch.Tensor]) -> float:
    """Largest absolute ground-truth magnitude over an evaluation set."""
    peak = max(float(t[:, 0].abs().max()) for t in tensors)
    return peak if peak > 0 else 1.0

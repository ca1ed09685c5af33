"""Denoising score matching loss and the reverse-time Euler-Maruyama sampler."""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional

import torch

from codec.training import NonFiniteLossError
from enhance.sde import SdeParams, drift, marginal_std, noise_schedule, perturbation_kernel

logger = logging.getLogger(__name__)

ScoreFn = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]


def dsm_loss(
    x0: torch.Tensor,
    y: torch.Tensor,
    score_fn: ScoreFn,
    p: SdeParams,
    generator: Optional[torch.Generator] = None,
    t: Optional[torch.Tensor] = None,
    z: Optional[torch.Tensor] = None,
    weighting: str = "none",
) -> torch.Tensor:
    """E || s(x_t, y, t) + z / std ||^2 with x_t = mean + std z and t ~ U(t_eps, 1).

    `weighting="std2"` multiplies each item by std(t)^2, i.e. || std s + z ||^2.
    """
    if weighting not in ("none", "std2"):
        raise ValueError(f"unknown weighting {weighting!r}")
    b = x0.shape[0]
    if t is None:
        t = p.t_eps + (1 - p.t_eps) * torch.rand(b, generator=generator, dtype=x0.dtype, device=x0.device)
    if z is None:
        z = torch.randn(x0.shape, generator=generator, dtype=x0.dtype, device=x0.device)
    mean, std = perturbation_kernel(x0, y, t, p)
    x_t = mean + std * z
    score = score_fn(x_t, y, t)
    if weighting == "std2":
        residual = score * std + z
    else:
        residual = score + z / std
    loss = residual.pow(2).flatten(1).sum(dim=1).mean()
    if not torch.isfinite(loss):
        raise NonFiniteLossError(f"non-finite DSM loss {float(loss)}", {"task": float(loss)})
    return loss


def grid_dsm_loss(
    x0: torch.Tensor,
    y: torch.Tensor,
    score_fn: ScoreFn,
    p: SdeParams,
    n_points: int = 8,
    seed: int = 0,
    weighting: str = "none",
) -> torch.Tensor:
    """DSM loss averaged over a fixed t grid on [t_eps, 1] with seeded noise; a deterministic distortion."""
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    gen = torch.Generator(device=x0.device).manual_seed(seed)
    total = 0.0
    for t in torch.linspace(p.t_eps, 1.0, n_points, dtype=x0.dtype).tolist():
        z = torch.randn(x0.shape, generator=gen, dtype=x0.dtype, device=x0.device)
        tt = torch.full((x0.shape[0],), t, dtype=x0.dtype, device=x0.device)
        total = total + dsm_loss(x0, y, score_fn, p, t=tt, z=z, weighting=weighting)
    return total / n_points


@torch.no_grad()
def reverse_sample(
    y: torch.Tensor,
    score_fn: ScoreFn,
    p: SdeParams,
    seed: int = 0,
    n_steps: Optional[int] = None,
) -> torch.Tensor:
    """Integrate the reverse SDE from t=1 down to t_eps, starting at y + std(1) noise."""
    n = n_steps or p.n_steps
    gen = torch.Generator(device=y.device).manual_seed(seed)
    b = y.shape[0]
    x = y + marginal_std(1.0, p) * torch.randn(y.shape, generator=gen, dtype=y.dtype, device=y.device)
    ts = torch.linspace(1.0, p.t_eps, n + 1, dtype=y.dtype)
    for i in range(n):
        t, dt = float(ts[i]), float(ts[i] - ts[i + 1])
        g = noise_schedule(t, p)
        score = score_fn(x, y, torch.full((b,), t, dtype=y.dtype, device=y.device))
        x = x - (drift(x, t, y, p) - g ** 2 * score) * dt
        if i < n - 1:
            x = x + g * math.sqrt(dt) * torch.randn(x.shape, generator=gen, dtype=x.dtype, device=x.device)
    return x

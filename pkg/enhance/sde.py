"""Ornstein-Uhlenbeck variance-exploding SDE drifting the clean spectrogram toward the noisy one.

    dx = theta (y - x) dt + sigma(t) dw
    sigma(t) = sigma_min (sigma_max / sigma_min)^t sqrt(2 log(sigma_max / sigma_min))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import torch

Time = Union[float, torch.Tensor]


@dataclass(frozen=True)
class SdeParams:
    theta: float = 1.5
    sigma_min: float = 0.05
    sigma_max: float = 0.5
    n_steps: int = 30
    t_eps: float = 1e-3

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not (0 < self.sigma_min < self.sigma_max):
            raise ValueError(f"need 0 < sigma_min < sigma_max, got {self.sigma_min}, {self.sigma_max}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not (0 < self.t_eps < 1):
            raise ValueError(f"t_eps must lie in (0, 1), got {self.t_eps}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SdeParams":
        kw = {k: raw[k] for k in ("theta", "sigma_min", "sigma_max", "t_eps") if k in raw}
        kw = {k: float(v) for k, v in kw.items()}
        if "n_steps" in raw:
            kw["n_steps"] = int(raw["n_steps"])
        return cls(**kw)

    @property
    def logsig(self) -> float:
        return math.log(self.sigma_max / self.sigma_min)


def _check_t(t: Time) -> None:
    lo, hi = (float(t.min()), float(t.max())) if torch.is_tensor(t) else (float(t), float(t))
    if lo < 0 or hi > 1:
        raise ValueError(f"t must lie in [0, 1], got range [{lo}, {hi}]")


def _exp(x: Time) -> Time:
    return torch.exp(x) if torch.is_tensor(x) else math.exp(x)


def noise_schedule(t: Time, p: SdeParams) -> Time:
    """Diffusion coefficient sigma(t)."""
    _check_t(t)
    return p.sigma_min * (p.sigma_max / p.sigma_min) ** t * math.sqrt(2 * p.logsig)


def drift(x: torch.Tensor, t: Time, y: torch.Tensor, p: SdeParams) -> torch.Tensor:
    return p.theta * (y - x)


def marginal_std(t: Time, p: SdeParams) -> Time:
    """Closed-form std of x_t | x_0 from the variance integral of sigma(t)^2 under OU decay."""
    _check_t(t)
    theta, logsig = p.theta, p.logsig
    var = (
        p.sigma_min ** 2
        * _exp(-2 * theta * t)
        * (_exp(2 * (theta + logsig) * t) - 1)
        * logsig
        / (theta + logsig)
    )
    return var ** 0.5


def _batch_view(a: Time, like: torch.Tensor) -> Time:
    if torch.is_tensor(a) and a.ndim == 1:
        return a.view(-1, *(1 for _ in range(like.ndim - 1)))
    return a


def perturbation_kernel(x0: torch.Tensor, y: torch.Tensor, t: Time, p: SdeParams) -> Tuple[torch.Tensor, Time]:
    """(mean, std) of the Gaussian kernel p(x_t | x_0, y). A 1-D `t` is read per batch item."""
    _check_t(t)
    decay = _batch_view(_exp(-p.theta * t), x0)
    mean = decay * x0 + (1 - decay) * y
    return mean, _batch_view(marginal_std(t, p), x0)


def euler_maruyama_forward(
    x0: torch.Tensor, y: torch.Tensor, t: float, p: SdeParams, n_steps: int, generator: torch.Generator
) -> torch.Tensor:
    """Simulate the forward SDE from 0 to t; used as the reference for the closed form."""
    x = x0.clone()
    dt = t / n_steps
    for i in range(n_steps):
        s = i * dt
        noise = torch.randn(x.shape, generator=generator, dtype=x.dtype, device=x.device)
        x = x + drift(x, s, y, p) * dt + noise_schedule(s, p) * math.sqrt(dt) * noise
    return x

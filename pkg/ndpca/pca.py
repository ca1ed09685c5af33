"""Per-source PCA bases over encoder latents."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-6


@dataclass
class PcaBasis:
    mean: torch.Tensor              # (v,)
    directions: torch.Tensor        # (v, v), orthonormal columns
    singular_values: torch.Tensor   # (v,), nonincreasing

    @property
    def width(self) -> int:
        return int(self.mean.numel())

    def state_dict(self) -> dict:
        return {"mean": self.mean, "directions": self.directions, "singular_values": self.singular_values}

    @classmethod
    def from_state(cls, raw: dict) -> "PcaBasis":
        return cls(mean=raw["mean"], directions=raw["directions"], singular_values=raw["singular_values"])


def _fix_signs(u: torch.Tensor) -> torch.Tensor:
    """Flip each column so its first nonzero entry is positive."""
    nonzero = u.abs() > 1e-12
    first = torch.argmax(nonzero.to(u.dtype), dim=0)
    pivots = u[first, torch.arange(u.shape[1])]
    signs = torch.where(pivots < 0, -torch.ones_like(pivots), torch.ones_like(pivots))
    return u * signs


def fit_local_pca(samples: torch.Tensor) -> PcaBasis:
    """Centered SVD of an N x v sample matrix."""
    if samples.ndim != 2:
        raise ValueError(f"expected N x v samples, got {tuple(samples.shape)}")
    n, v = samples.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples to fit a basis, got {n}")
    samples = samples.detach()
    mean = samples.mean(dim=0)
    _, s, vh = torch.linalg.svd(samples - mean, full_matrices=True)
    singular = torch.zeros(v, dtype=samples.dtype, device=samples.device)
    singular[: s.numel()] = s
    directions = _fix_signs(vh.transpose(0, 1).contiguous())
    return PcaBasis(mean=mean, directions=directions, singular_values=singular)


def project(z: torch.Tensor, basis: PcaBasis, k: int) -> torch.Tensor:
    """Coefficients of (z - mean) on the first k directions; works on (v,) or (N, v)."""
    if k < 0 or k > basis.width:
        raise ValueError(f"k={k} outside [0, {basis.width}]")
    return (z - basis.mean) @ basis.directions[:, :k]


def lift(coeffs: torch.Tensor, basis: PcaBasis) -> torch.Tensor:
    """Inverse of project: mean + U[:, :k] coeffs."""
    k = coeffs.shape[-1]
    if k > basis.width:
        raise ValueError(f"{k} coefficients for a basis of width {basis.width}")
    return basis.mean + coeffs @ basis.directions[:, :k].transpose(0, 1)


def joint_pca_truncate(z: torch.Tensor, budget: int, basis: PcaBasis | None = None) -> torch.Tensor:
    """Keep the top-`budget` principal components of the concatenated latent.

    Fits a joint basis on `z` unless one is given.
    """
    basis = basis if basis is not None else fit_local_pca(z)
    if budget < 0 or budget > basis.width:
        raise ValueError(f"budget {budget} outside [0, {basis.width}]")
    return lift(project(z, basis, budget), basis)

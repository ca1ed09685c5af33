"""Compression stages over a LatentBlock: joint PCA, NDPCA global selection, naive equal split."""

from __future__ import annotations

import logging
from typing import Dict, Optional, Tuple

import torch

from losses.terms import LatentBlock
from ndpca.allocation import CompressedBlock, allocate_components, compress, equal_split, reassemble
from ndpca.pca import PcaBasis, fit_local_pca

logger = logging.getLogger(__name__)

Compressed = Tuple[torch.Tensor, CompressedBlock]


def fit_group_bases(latents: LatentBlock) -> Dict[int, PcaBasis]:
    return {sid: fit_local_pca(z) for sid, z in latents.by_source().items()}


def _check_budget(latents: LatentBlock, budget: int) -> None:
    if budget < 0 or budget > latents.width:
        raise ValueError(f"budget {budget} outside [0, {latents.width}] (total latent width)")


def ndpca_compress(latents: LatentBlock, budget: int, bases: Optional[Dict[int, PcaBasis]] = None) -> Compressed:
    """Top-`budget` singular values across all groups; a single group is joint PCA."""
    _check_budget(latents, budget)
    bases = bases or fit_group_bases(latents)
    ids = latents.source_ids
    alloc = allocate_components([bases[sid] for sid in ids], budget, ids)
    block = compress(latents.by_source(), bases, alloc)
    return reassemble(block, bases, alloc), block


def naive_split_compress(latents: LatentBlock, budget: int, bases: Optional[Dict[int, PcaBasis]] = None) -> Compressed:
    """floor(B/G) components per group (remainder to the lowest ids), each truncated by its local PCA."""
    _check_budget(latents, budget)
    bases = bases or fit_group_bases(latents)
    alloc = equal_split(dict(zip(latents.source_ids, latents.widths)), budget)
    block = compress(latents.by_source(), bases, alloc)
    return reassemble(block, bases, alloc), block


def joint_compress(latents: LatentBlock, budget: int, basis: Optional[PcaBasis] = None) -> Compressed:
    """PCA of the concatenated latent, as if one encoder saw every source."""
    joint = LatentBlock(vectors=[latents.concat()], source_ids=[0])
    return ndpca_compress(joint, budget, None if basis is None else {0: basis})


def latent_error(z: torch.Tensor, zhat: torch.Tensor) -> float:
    """Summed squared error per sample."""
    return float((z - zhat).pow(2).sum(dim=-1).mean())

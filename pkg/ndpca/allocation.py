"""Global top-B component selection across sources, transmission blocks and reassembly."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import torch

from ndpca.pca import PcaBasis, lift, project

logger = logging.getLogger(__name__)


@dataclass
class BandwidthAllocation:
    per_source: Dict[int, int]
    budget: int

    def __post_init__(self):
        if sum(self.per_source.values()) != self.budget:
            raise ValueError(f"allocation {self.per_source} does not sum to budget {self.budget}")
        if any(k < 0 for k in self.per_source.values()):
            raise ValueError(f"negative component count in {self.per_source}")

    @property
    def source_ids(self) -> List[int]:
        return sorted(self.per_source)


@dataclass
class CompressedBlock:
    coeffs: Dict[int, torch.Tensor]     # source id -> (N, k_i) or (k_i,)
    allocation: BandwidthAllocation = field(repr=False)

    def __post_init__(self):
        for sid, k in self.allocation.per_source.items():
            got = self.coeffs.get(sid)
            if got is None or got.shape[-1] != k:
                width = None if got is None else got.shape[-1]
                raise ValueError(f"source {sid}: {width} coefficients, allocation says {k}")

    @property
    def transmitted(self) -> int:
        """Floats per sample across all sources."""
        return sum(c.shape[-1] for c in self.coeffs.values())


def _ids(bases: Sequence[PcaBasis], source_ids: Sequence[int] | None) -> List[int]:
    ids = list(source_ids) if source_ids is not None else list(range(len(bases)))
    if len(ids) != len(bases) or len(set(ids)) != len(ids):
        raise ValueError(f"source ids {ids} do not match {len(bases)} bases")
    return ids


def allocate_components(
    bases: Sequence[PcaBasis], budget: int, source_ids: Sequence[int] | None = None
) -> BandwidthAllocation:
    """Pick the `budget` largest singular values over all sources.

    Ties go to the lower source id, then to the lower component index.
    """
    ids = _ids(bases, source_ids)
    total = sum(b.width for b in bases)
    if budget < 0 or budget > total:
        raise ValueError(f"budget {budget} outside [0, {total}]")
    candidates = []
    for sid, basis in zip(ids, bases):
        for idx, s in enumerate(basis.singular_values.tolist()):
            candidates.append((-s, sid, idx))
    candidates.sort()
    counts = {sid: 0 for sid in ids}
    for _, sid, _ in candidates[:budget]:
        counts[sid] += 1
    return BandwidthAllocation(per_source=counts, budget=budget)


def equal_split(widths: Dict[int, int], budget: int) -> BandwidthAllocation:
    """floor(B/G) components per source, the remainder going to the lowest ids."""
    ids = sorted(widths)
    total = sum(widths.values())
    if budget < 0 or budget > total:
        raise ValueError(f"budget {budget} outside [0, {total}]")
    base, extra = divmod(budget, len(ids))
    counts = {sid: base + (1 if i < extra else 0) for i, sid in enumerate(ids)}
    over = [sid for sid in ids if counts[sid] > widths[sid]]
    if over:
        raise ValueError(f"equal split of {budget} exceeds the width of sources {over}")
    return BandwidthAllocation(per_source=counts, budget=budget)


def compress(
    latents: Dict[int, torch.Tensor], bases: Dict[int, PcaBasis], alloc: BandwidthAllocation
) -> CompressedBlock:
    coeffs = {sid: project(latents[sid], bases[sid], alloc.per_source[sid]) for sid in alloc.source_ids}
    return CompressedBlock(coeffs=coeffs, allocation=alloc)


def reassemble(block: CompressedBlock, bases: Dict[int, PcaBasis], alloc: BandwidthAllocation) -> torch.Tensor:
    """Concatenate per-source reconstructions in source-id order.

    Unselected components fall back to the source mean.
    """
    if block.allocation.per_source != alloc.per_source:
        raise ValueError(f"block allocation {block.allocation.per_source} != {alloc.per_source}")
    missing = [sid for sid in alloc.source_ids if sid not in bases]
    if missing:
        raise ValueError(f"no basis for sources {missing}")
    parts = [lift(block.coeffs[sid], bases[sid]) for sid in alloc.source_ids]
    return torch.cat(parts, dim=-1)

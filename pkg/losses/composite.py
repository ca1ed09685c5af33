"""Weighted combination of loss terms and its CSV row form."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import torch

from codec.training import NonFiniteLossError

# term name in LossBreakdown -> weight field in LossWeights
TERM_WEIGHTS = {
    "mse": "w_mse",
    "cos": "w_cos",
    "snr": "w_snr",
    "psnr": "w_psnr",
    "nuclear": "w_nuc",
    "task": "w_task",
    "perceptual": "w_perc",
}
CSV_COLUMNS = ["step", "mse", "cos", "snr", "psnr", "nuclear", "task", "perceptual", "total"]


@dataclass(frozen=True)
class LossWeights:
    w_mse: float = 1.0
    w_cos: float = 0.1
    w_snr: float = 0.01
    w_psnr: float = 0.0
    w_nuc: float = 0.001
    w_task: float = 1.0
    w_perc: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @classmethod
    def from_dict(cls, raw: dict) -> "LossWeights":
        return cls(**{k: float(v) for k, v in raw.items() if k in cls.__dataclass_fields__})

    @property
    def task_aware(self) -> bool:
        return self.w_task > 0 or self.w_perc > 0


@dataclass
class LossBreakdown:
    terms: Dict[str, torch.Tensor]
    total: torch.Tensor
    extras: Dict[str, float] = field(default_factory=dict)

    def scalars(self) -> Dict[str, float]:
        out = {name: float(self.terms[name]) if name in self.terms else 0.0 for name in TERM_WEIGHTS}
        out["total"] = float(self.total)
        return out

    def to_row(self, step: int) -> List:
        values = self.scalars()
        return [step] + [values[c] for c in CSV_COLUMNS[1:]]


def composite_loss(terms: Dict[str, torch.Tensor], w: LossWeights) -> LossBreakdown:
    """Weighted sum over the named terms; absent terms count as zero."""
    unknown = set(terms) - set(TERM_WEIGHTS)
    if unknown:
        raise ValueError(f"unknown loss terms: {sorted(unknown)}")
    bad = {k: float(v) for k, v in terms.items() if not torch.isfinite(torch.as_tensor(v)).all()}
    if bad:
        raise NonFiniteLossError(f"non-finite loss terms {bad}", bad)
    total: Optional[torch.Tensor] = None
    for name, value in terms.items():
        weight = getattr(w, TERM_WEIGHTS[name])
        contrib = weight * value
        total = contrib if total is None else total + contrib
    if total is None:
        total = torch.zeros(())
    return LossBreakdown(terms=dict(terms), total=total)


class BreakdownWriter:
    """Appends one `step,mse,...,total` row per training step."""

    def __init__(self, path: str, append: bool = False):
        self.path = path
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        fresh = not (append and os.path.exists(path))
        self._fh = open(path, "a" if not fresh else "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        if fresh:
            self._writer.writerow(CSV_COLUMNS)

    def write(self, step: int, breakdown: LossBreakdown) -> None:
        self._writer.writerow(breakdown.to_row(step))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

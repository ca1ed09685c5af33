"""Capacity traces (`time_s,capacity_bps` CSV) and their budget series."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Tuple

from channel.capacity import ChannelParams, dimension_budget

logger = logging.getLogger(__name__)

TRACE_HEADER = ("time_s", "capacity_bps")


@dataclass
class ChannelTrace:
    samples: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        last = -math.inf
        for t, c in self.samples:
            if not t > last:
                raise ValueError(f"trace times must be strictly increasing, got {t} after {last}")
            if c < 0 or not math.isfinite(c):
                raise ValueError(f"capacity must be finite and >= 0, got {c} at t={t}")
            last = t

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> List[float]:
        return [t for t, _ in self.samples]

    @property
    def capacities(self) -> List[float]:
        return [c for _, c in self.samples]


def budget_trace(tr: ChannelTrace, p: ChannelParams) -> List[int]:
    """One budget per trace sample; budgets are re-evaluated once per sample."""
    return [dimension_budget(c, p) for c in tr.capacities]


def read_trace(path: str) -> ChannelTrace:
    if not os.path.exists(path):
        raise FileNotFoundError(f"capacity trace not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [k for k in TRACE_HEADER if k not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {', '.join(missing)}")
        samples = [(float(row["time_s"]), float(row["capacity_bps"])) for row in reader]
    logger.info("Loaded capacity trace samples=%d from %s", len(samples), path)
    return ChannelTrace(samples=samples)


def write_budget_csv(path: str, tr: ChannelTrace, budgets: List[int]) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "capacity_bps", "budget"])
        for (t, c), b in zip(tr.samples, budgets):
            writer.writerow([t, c, b])

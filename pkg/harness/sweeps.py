"""Bandwidth and rate-distortion-perception sweeps over trained checkpoints."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import astuple, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from data.batching import full_batch
from harness.train import TrainedModels, load_trained, prepare_splits
from losses.terms import peak_value
from pipelines.pipeline import Pipeline, run_pipeline

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["variant", "ndpca", "budget", "psnr_db", "mse", "cos", "snr", "task", "perc", "weight"]


@dataclass
class SweepRow:
    variant: str
    ndpca: int
    budget: int
    psnr_db: float
    mse: float
    cos: float
    snr: float
    task: float
    perc: float
    weight: float

    @classmethod
    def from_csv(cls, row: dict) -> "SweepRow":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for name in SWEEP_COLUMNS:
            cast = {"str": str, "int": int, "float": float}[kinds[name]]
            out[name] = cast(row[name])
        return cls(**out)

    @property
    def label(self) -> str:
        if self.variant == "E1D1":
            return "Joint E1D1"
        return f"{'NDPCA' if self.ndpca else 'Naive'} {self.variant}"


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path: str) -> None:
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for row in self.rows:
                writer.writerow(astuple(row))
        logger.info("Sweep written rows=%d to %s", len(self.rows), path)

    @classmethod
    def read_csv(cls, path: str) -> "SweepResult":
        if not os.path.exists(path):
            raise FileNotFoundError(f"sweep csv not found: {path}")
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in SWEEP_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"{path}: missing columns {', '.join(missing)}")
            return cls(rows=[SweepRow.from_csv(r) for r in reader])

    def series(self, key: str = "psnr_db", by: str = "label") -> Dict[str, Tuple[List[int], List[float]]]:
        """Points sorted by budget, grouped by curve label (or by perception weight)."""
        curves: Dict[str, List[Tuple[int, float]]] = {}
        for row in self.rows:
            name = row.label if by == "label" else f"w_perc={row.weight:g}"
            curves.setdefault(name, []).append((row.budget, getattr(row, key)))
        out = {}
        for name in sorted(curves):
            pts = sorted(curves[name])
            out[name] = ([b for b, _ in pts], [v for _, v in pts])
        return out


def _stages(pipeline: Pipeline) -> List[Pipeline]:
    if pipeline.variant.grouping == "E1D1":
        return [pipeline]
    return [pipeline.with_stage(True), pipeline.with_stage(False)]


@torch.no_grad()
def _evaluate(models: TrainedModels, pipeline: Pipeline, budgets: Sequence[int], weight: float) -> List[SweepRow]:
    cfg = models.cfg
    _, test_cache = prepare_splits(cfg)
    batch = full_batch(test_cache)
    x_max = peak_value([test_cache.clean])
    task = models.task_context(t_grid=cfg.eval_t_grid)
    rows = []
    for budget in budgets:
        if budget > pipeline.width:
            logger.warning("Skipping budget=%d for %s: latent width is %d", budget, pipeline.variant.label, pipeline.width)
            continue
        _, breakdown, metrics = run_pipeline(pipeline, batch, budget, cfg.losses, x_max, task)
        s = breakdown.scalars()
        rows.append(
            SweepRow(
                variant=pipeline.variant.grouping,
                ndpca=int(pipeline.variant.stage == "ndpca"),
                budget=int(budget),
                psnr_db=metrics["psnr_db"],
                mse=metrics["mse"],
                cos=s["cos"],
                snr=s["snr"],
                task=s["task"],
                perc=s["perceptual"],
                weight=weight,
            )
        )
        logger.info(
            "Sweep point variant=%s budget=%d psnr=%.3f alloc=%s",
            pipeline.variant.label,
            budget,
            metrics["psnr_db"],
            metrics["allocation"],
        )
    return rows


def eval_bandwidth_sweep(
    checkpoints: Sequence[str], budgets: Sequence[int], variants: Optional[Sequence[str]] = None
) -> SweepResult:
    """PSNR on the held-out split for every (variant, budget).

    Distributed checkpoints are evaluated behind both the NDPCA and the naive equal-split stage;
    `variants` filters by label such as ``E4D1-ndpca``. Each label may come from one checkpoint only.
    """
    owners: Dict[str, str] = {}
    plan = []
    for path in checkpoints:
        models = load_trained(path)
        for pipeline in _stages(models.pipeline):
            label = pipeline.variant.label
            if variants and label not in variants:
                continue
            if label in owners:
                raise ValueError(f"{label} comes from both {owners[label]} and {path}; sweep them separately")
            owners[label] = path
            plan.append((models, pipeline))
    result = SweepResult()
    for models, pipeline in plan:
        result.rows.extend(_evaluate(models, pipeline, budgets, models.cfg.losses.w_perc))
    return result


def rdp_sweep(checkpoints: Dict[float, str], budgets: Sequence[int]) -> SweepResult:
    """Task distortion per (perception weight, budget); one checkpoint per weight."""
    for weight, path in checkpoints.items():
        if not os.path.exists(path):
            raise FileNotFoundError(f"no checkpoint for perception weight {weight}: {path}")
    result = SweepResult()
    for weight in sorted(checkpoints):
        models = load_trained(checkpoints[weight])
        if models.score_net is None:
            raise ValueError(f"checkpoint {checkpoints[weight]} was trained without the enhancement head")
        result.rows.extend(_evaluate(models, models.pipeline, budgets, float(weight)))
    return result

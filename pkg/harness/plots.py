"""Line plots for sweep CSVs and capacity traces (PNG, fixed styling, no timestamps)."""

from __future__ import annotations

import csv
import logging
import os
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from harness.sweeps import SweepResult  # noqa: E402

logger = logging.getLogger(__name__)

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
    "lines.markersize": 5,
}
MARKERS = ["o", "s", "^", "D", "v", "x"]


def _save(fig, path: str) -> str:
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    logger.info("Plot written %s", path)
    return path


def _line_plot(curves, xlabel: str, ylabel: str, title: str, path: str) -> str:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, (name, (xs, ys)) in enumerate(curves.items()):
            ax.plot(xs, ys, marker=MARKERS[i % len(MARKERS)], label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def emit_plots(csv_path: str, out_dir: str, title: str = "Total bandwidth vs. PSNR") -> List[str]:
    """PSNR-vs-bandwidth curve per variant; distortion-vs-bandwidth per weight when the CSV has several."""
    result = SweepResult.read_csv(csv_path)
    if not result.rows:
        raise ValueError(f"{csv_path}: no sweep rows to plot")
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    paths = [
        _line_plot(
            result.series("psnr_db"),
            "Total bandwidth",
            "PSNR [dB]",
            title,
            os.path.join(out_dir, f"{stem}_psnr.png"),
        )
    ]
    if len({r.weight for r in result.rows}) > 1:
        paths.append(
            _line_plot(
                result.series("task", by="weight"),
                "Total bandwidth",
                "Distortion (task loss)",
                "Rate-distortion under perception weights",
                os.path.join(out_dir, f"{stem}_rdp.png"),
            )
        )
    return paths


def plot_trace(budget_csv: str, out_dir: str) -> str:
    """Capacity and the resulting dimension budget over time, on twin axes."""
    if not os.path.exists(budget_csv):
        raise FileNotFoundError(f"budget csv not found: {budget_csv}")
    with open(budget_csv, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{budget_csv}: empty budget trace")
    t = [float(r["time_s"]) for r in rows]
    cap = [float(r["capacity_bps"]) for r in rows]
    budget = [int(r["budget"]) for r in rows]
    os.makedirs(out_dir, exist_ok=True)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, cap, color="tab:blue", label="Channel capacity")
        ax.set_xlabel("Time [s]")
        ax.set_ylabel("Capacity [bit/s]", color="tab:blue")
        ax2 = ax.twinx()
        ax2.step(t, budget, where="post", color="tab:orange", label="Total bandwidth")
        ax2.set_ylabel("Total bandwidth [floats]", color="tab:orange")
        ax.set_title("Channel capacity and dimension budget")
        fig.tight_layout()
        return _save(fig, os.path.join(out_dir, "capacity_budget.png"))

"""Experiment configuration: in-code defaults overridden section-wise by a JSON file."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import torch

from channel.capacity import ChannelParams
from codec.model import ArchConfig
from config.config_store import merge_sections, read_json
from config.validators import validate_experiment
from data.synth import SynthConfig
from dsp.stft import StftConfig
from enhance.sde import SdeParams
from losses.composite import LossWeights
from percept.discriminator import ScaleConfig
from pipelines.pipeline import PipelineVariant

logger = logging.getLogger(__name__)

DEFAULT_EXPERIMENT = {
    "pipeline": {"variant": "E4D1", "use_ndpca": True},
    "arch": {
        "freq_bins": 129,
        "frames": 16,
        "freq_proj_hidden": 256,
        "freq_proj_out": 128,
        "n_res_blocks": 2,
        "latent_dim": 64,
        "conv_channels": 32,
        "kernel": 3,
    },
    "channel": {"eta": 1.0, "period_T": 1.0, "source_var": 4.0, "quant_dist": 1.0},
    "losses": {
        "w_mse": 1.0,
        "w_cos": 0.1,
        "w_snr": 0.01,
        "w_psnr": 0.0,
        "w_nuc": 0.001,
        "w_task": 1.0,
        "w_perc": 0.0,
    },
    "sde": {"theta": 1.5, "sigma_min": 0.05, "sigma_max": 0.5, "n_steps": 30, "t_eps": 0.001},
    "disc": {"fft_sizes": [64, 128, 256], "channels": 16},
    "data": {
        "source": "synth",
        "n_clips": 64,
        "clip_seconds": 0.064,
        "n_sources": 4,
        "train_fraction": 0.8,
        "annotations": None,
        "wav_dir": None,
        "cache_dir": None,
    },
    "stft": {"fft_size": 256, "hop": 64, "window": 256, "sample_rate": 16000},
    "train": {
        "epochs": 30,
        "batch_size": 16,
        "lr": 2e-4,
        "seed": 0,
        "dsm_weighting": "std2",
        "feature_weight": 1.0,
        "score_hidden": 32,
        "eval_t_grid": 8,
        "dtype": "float32",
    },
    "budgets": [8, 16, 32, 64],
    "output_dir": "runs/default",
}

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class ExperimentConfig:
    pipeline: PipelineVariant
    arch: ArchConfig
    channel: ChannelParams
    losses: LossWeights
    sde: SdeParams
    disc: ScaleConfig
    stft: StftConfig
    data: dict
    budgets: List[int]
    epochs: int
    batch_size: int
    lr: float
    seed: int
    output_dir: str
    dsm_weighting: str = "std2"
    feature_weight: float = 1.0
    score_hidden: int = 32
    eval_t_grid: int = 8
    dtype: torch.dtype = torch.float32
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Validates a fully merged config dict."""
        err = validate_experiment(raw)
        if err:
            raise ValueError(f"invalid experiment config: {err}")
        train = raw["train"]
        if train.get("dtype", "float32") not in DTYPES:
            raise ValueError(f"invalid experiment config: train: dtype must be one of {', '.join(DTYPES)}")
        arch = ArchConfig.from_dict(raw["arch"])
        stft = StftConfig(**{k: int(v) for k, v in raw["stft"].items()})
        if stft.freq_bins != arch.freq_bins:
            raise ValueError(f"stft gives {stft.freq_bins} bins, arch expects {arch.freq_bins}")
        return cls(
            pipeline=PipelineVariant.from_dict(raw["pipeline"]),
            arch=arch,
            channel=ChannelParams.from_dict(raw["channel"]),
            losses=LossWeights.from_dict(raw["losses"]),
            sde=SdeParams.from_dict(raw["sde"]),
            disc=ScaleConfig.from_dict(raw["disc"]),
            stft=stft,
            data=dict(raw["data"]),
            budgets=[int(b) for b in raw["budgets"]],
            epochs=int(train["epochs"]),
            batch_size=int(train["batch_size"]),
            lr=float(train["lr"]),
            seed=int(train.get("seed", 0)),
            output_dir=str(raw.get("output_dir", "runs/default")),
            dsm_weighting=str(train.get("dsm_weighting", "std2")),
            feature_weight=float(train.get("feature_weight", 1.0)),
            score_hidden=int(train.get("score_hidden", 32)),
            eval_t_grid=int(train.get("eval_t_grid", 8)),
            dtype=DTYPES[train.get("dtype", "float32")],
            raw=raw,
        )

    @property
    def synth(self) -> SynthConfig:
        return SynthConfig.from_dict({**self.data, "seed": self.seed, "sample_rate": self.stft.sample_rate})


def load_experiment(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """DEFAULT_EXPERIMENT, then the JSON file at `path`, then `overrides`."""
    raw = DEFAULT_EXPERIMENT
    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(f"experiment config not found: {path}")
        raw = merge_sections(raw, read_json(path))
        logger.info("Loaded experiment config %s", path)
    raw = merge_sections(raw, overrides)
    return ExperimentConfig.from_dict(raw)

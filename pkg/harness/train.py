"""End-to-end training: codec (+ enhancer and discriminator when task-aware)."""

from __future__ import annotations

import copy
import logging
import os
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import torch

from codec.training import NonFiniteLossError, grad_step, load_checkpoint, make_optimizer, save_checkpoint
from config.config_store import write_json
from data.archive import load_cache, save_cache
from data.batching import SpectralCache, full_batch, iter_cache, spectral_cache
from data.corpus import MultiSourceDataset, split_dataset
from data.segmented import load_segmented_corpus
from data.synth import synth_corpus
from dsp.stft import to_waveform
from enhance.score_net import ScoreNet
from harness.config import ExperimentConfig
from losses.composite import BreakdownWriter
from losses.terms import peak_value
from percept.adversarial import disc_update
from percept.discriminator import MultiScaleSTFTDiscriminator
from pipelines.pipeline import Pipeline, TaskContext, build_pipeline, run_pipeline

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.pt"
BREAKDOWN_NAME = "breakdown.csv"
CONFIG_NAME = "config.json"
CACHE_SUFFIX = ".ndpc"
SPLITS = ("train", "test")


# ---------------------------------------------------------------------- data
def load_corpus(cfg: ExperimentConfig) -> MultiSourceDataset:
    source = cfg.data.get("source", "synth")
    if source == "synth":
        return synth_corpus(cfg.synth)
    if source == "segmented":
        if not cfg.data.get("annotations") or not cfg.data.get("wav_dir"):
            raise ValueError("segmented data needs data.annotations and data.wav_dir")
        return load_segmented_corpus(cfg.data["annotations"], cfg.data["wav_dir"], cfg.stft.sample_rate)
    raise ValueError(f"unknown data source {source!r}")


def cache_key(cfg: ExperimentConfig, split: str) -> dict:
    """Everything a cached split depends on."""
    data = {k: v for k, v in cfg.data.items() if k != "cache_dir"}
    return {"split": split, "seed": cfg.seed, "frames": cfg.arch.frames, "stft": asdict(cfg.stft), "data": data}


def _build_splits(cfg: ExperimentConfig) -> Tuple[SpectralCache, SpectralCache]:
    train_ds, test_ds = split_dataset(load_corpus(cfg), float(cfg.data.get("train_fraction", 0.8)), cfg.seed)
    return spectral_cache(train_ds, cfg.stft, cfg.arch.frames), spectral_cache(test_ds, cfg.stft, cfg.arch.frames)


def prepare_splits(cfg: ExperimentConfig) -> Tuple[SpectralCache, SpectralCache]:
    """Seeded 80/20 split by clip, as (train, held-out) spectral caches in the configured dtype.

    With `data.cache_dir` set, the splits are read from `<cache_dir>/<split>.ndpc` when the
    archived key matches the config, and rebuilt and archived otherwise.
    """
    cache_dir = cfg.data.get("cache_dir")
    splits = None
    if cache_dir:
        loaded = []
        for split in SPLITS:
            path = os.path.join(cache_dir, split + CACHE_SUFFIX)
            if not os.path.exists(path):
                break
            cache, meta = load_cache(path)
            if meta != cache_key(cfg, split):
                logger.info("Cache %s was built for another config, rebuilding", path)
                break
            loaded.append(cache)
        if len(loaded) == len(SPLITS):
            logger.info("Loaded spectral caches from %s", cache_dir)
            splits = tuple(loaded)
    if splits is None:
        splits = _build_splits(cfg)
        if cache_dir:
            for split, cache in zip(SPLITS, splits):
                save_cache(os.path.join(cache_dir, split + CACHE_SUFFIX), cache, cache_key(cfg, split))
    train_cache, test_cache = (SpectralCache(clean=c.clean.to(cfg.dtype), mics=c.mics.to(cfg.dtype)) for c in splits)
    return train_cache, test_cache


@torch.no_grad()
def refit_bases(pipeline: Pipeline, cache: SpectralCache) -> None:
    _, sources = full_batch(cache)
    pipeline.fit_bases(pipeline.encode(sources))


# ---------------------------------------------------------------------- models
def build_heads(cfg: ExperimentConfig) -> Tuple[Optional[ScoreNet], Optional[MultiScaleSTFTDiscriminator]]:
    score_net, disc = None, None
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed + 1)
        if cfg.losses.w_task > 0:
            score_net = ScoreNet(cfg.sde, hidden=cfg.score_hidden).to(cfg.dtype)
        if cfg.losses.w_perc > 0:
            disc = MultiScaleSTFTDiscriminator(cfg.disc).to(cfg.dtype)
    return score_net, disc


@dataclass
class TrainedModels:
    cfg: ExperimentConfig
    pipeline: Pipeline
    score_net: Optional[ScoreNet]
    disc: Optional[MultiScaleSTFTDiscriminator]
    checkpoint: dict

    def task_context(self, t_grid: Optional[int] = None, generator: Optional[torch.Generator] = None) -> Optional[TaskContext]:
        if self.score_net is None and self.disc is None:
            return None
        return TaskContext(
            sde=self.cfg.sde,
            stft=self.cfg.stft,
            score_net=self.score_net,
            disc=self.disc,
            dsm_weighting=self.cfg.dsm_weighting,
            feature_weight=self.cfg.feature_weight,
            generator=generator,
            t_grid=t_grid,
            grid_seed=self.cfg.seed,
        )


def load_trained(path: str) -> TrainedModels:
    ckpt = load_checkpoint(path)
    cfg = ExperimentConfig.from_dict(ckpt["config"])
    pipeline = Pipeline.from_state(ckpt["pipeline"])
    score_net, disc = build_heads(cfg)
    if score_net is not None:
        score_net.load_state_dict(ckpt["score_net"])
    if disc is not None:
        disc.load_state_dict(ckpt["disc"])
    return TrainedModels(cfg=cfg, pipeline=pipeline, score_net=score_net, disc=disc, checkpoint=ckpt)


# ---------------------------------------------------------------------- loop
def train(cfg: ExperimentConfig, resume: Optional[str] = None) -> str:
    """Train to `cfg.epochs`; returns the checkpoint path.

    One generator step (codec and enhancer) then one discriminator step per batch. PCA bases
    are refit on the training split at every epoch end, right before the checkpoint is written.
    """
    os.makedirs(cfg.output_dir, exist_ok=True)
    ckpt_path = os.path.join(cfg.output_dir, CHECKPOINT_NAME)
    write_json(os.path.join(cfg.output_dir, CONFIG_NAME), copy.deepcopy(cfg.raw), touch_last_update=True)
    train_cache, _ = prepare_splits(cfg)
    x_max = peak_value([train_cache.clean])
    gen = torch.Generator().manual_seed(cfg.seed)

    if resume:
        models = load_trained(resume)
        pipeline, score_net, disc, ckpt = models.pipeline, models.score_net, models.disc, models.checkpoint
    else:
        pipeline = build_pipeline(cfg.pipeline, cfg.arch, cfg.channel, seed=cfg.seed, dtype=cfg.dtype)
        score_net, disc = build_heads(cfg)
        ckpt = {}
        refit_bases(pipeline, train_cache)

    gen_params = list(pipeline.parameters()) + (list(score_net.parameters()) if score_net is not None else [])
    opt = make_optimizer(gen_params, cfg.lr)
    disc_opt = make_optimizer(disc.parameters(), cfg.lr) if disc is not None else None
    start_epoch, step, history = 0, 0, []
    if ckpt:
        opt.load_state_dict(ckpt["opt"])
        if disc_opt is not None:
            disc_opt.load_state_dict(ckpt["disc_opt"])
        gen.set_state(ckpt["rng"])
        start_epoch, step, history = ckpt["epoch"], ckpt["step"], list(ckpt["history"])
        logger.info("Resumed from %s epoch=%d step=%d", resume, start_epoch, step)

    task = None
    if score_net is not None or disc is not None:
        task = TaskContext(
            sde=cfg.sde,
            stft=cfg.stft,
            score_net=score_net,
            disc=disc,
            dsm_weighting=cfg.dsm_weighting,
            feature_weight=cfg.feature_weight,
            generator=gen,
        )
    logger.info(
        "Training variant=%s task_aware=%s epochs=%d items=%d lr=%g",
        cfg.pipeline.label,
        task is not None,
        cfg.epochs,
        len(train_cache),
        cfg.lr,
    )

    last = {}

    def loss_fn(batch):
        recon, breakdown, _ = run_pipeline(pipeline, batch, pipeline.width, cfg.losses, x_max, task)
        last["recon"] = recon
        return breakdown

    writer = BreakdownWriter(os.path.join(cfg.output_dir, BREAKDOWN_NAME), append=bool(resume))
    try:
        for epoch in range(start_epoch, cfg.epochs):
            totals = []
            for clean, sources in iter_cache(train_cache, cfg.batch_size, seed=cfg.seed + epoch):
                try:
                    breakdown = grad_step((clean, sources), opt, loss_fn)
                except NonFiniteLossError as e:
                    last_good = ckpt_path if os.path.exists(ckpt_path) else None
                    logger.error("Training aborted epoch=%d step=%d terms=%s last_good=%s", epoch, step, e.terms, last_good)
                    raise
                if disc is not None:
                    real = to_waveform(clean, cfg.stft)
                    fake = to_waveform(last["recon"], cfg.stft)
                    disc_update(real, fake, disc, disc_opt)
                writer.write(step, breakdown)
                totals.append(float(breakdown.total))
                step += 1

            refit_bases(pipeline, train_cache)
            history.append(sum(totals) / len(totals))
            save_checkpoint(
                ckpt_path,
                {
                    "epoch": epoch + 1,
                    "step": step,
                    "history": history,
                    "config": cfg.raw,
                    "x_max": x_max,
                    "pipeline": pipeline.state(),
                    "score_net": score_net.state_dict() if score_net is not None else None,
                    "disc": disc.state_dict() if disc is not None else None,
                    "opt": opt.state_dict(),
                    "disc_opt": disc_opt.state_dict() if disc_opt is not None else None,
                    "rng": gen.get_state(),
                },
            )
            logger.info("Epoch done epoch=%d total=%.4f", epoch + 1, history[-1])
    finally:
        writer.close()
    return ckpt_path

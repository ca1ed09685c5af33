"""Command-line entry point.

    python -m harness.cli train --config config/experiment.json
    python -m harness.cli sweep --ckpt runs/e4/checkpoint.pt runs/e1/checkpoint.pt --budgets 8,16,32,64
    python -m harness.cli rdp --config config/experiment.json --weights 0,0.1,1.0 --budgets 16
    python -m harness.cli enhance --ckpt runs/e4/checkpoint.pt --in noisy.wav --out clean.wav
    python -m harness.cli plot --csv runs/sweep.csv --out-dir runs/plots
    python -m harness.cli trace --trace capacity.csv --out runs/budget.csv
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

import torch

from channel.capacity import ChannelParams
from channel.trace import budget_trace, read_trace, write_budget_csv
from config.config_store import read_json
from dsp.stft import Waveform, pack_tensor, stft_tensor, to_waveform
from dsp.wav import read_wav, write_wav
from enhance.objective import reverse_sample
from harness.config import load_experiment
from harness.plots import emit_plots, plot_trace
from harness.sweeps import eval_bandwidth_sweep, rdp_sweep
from harness.train import CHECKPOINT_NAME, load_trained, train
from logging_setup import configure_logging

logger = logging.getLogger(__name__)


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _train_overrides(args) -> dict:
    over: dict = {}
    if args.out:
        over["output_dir"] = args.out
    if args.epochs is not None:
        over.setdefault("train", {})["epochs"] = args.epochs
    losses = {}
    if args.task_agnostic:
        losses.update({"w_task": 0.0, "w_perc": 0.0})
    if args.perc_weight is not None:
        losses["w_perc"] = args.perc_weight
    if losses:
        over["losses"] = losses
    return over


def cmd_train(args) -> int:
    cfg = load_experiment(args.config, _train_overrides(args))
    path = train(cfg, resume=args.resume)
    print(path)
    return 0


def cmd_sweep(args) -> int:
    variants = args.variants.split(",") if args.variants else None
    result = eval_bandwidth_sweep(args.ckpt, _int_list(args.budgets), variants)
    result.write_csv(args.out)
    print(args.out)
    return 0


def cmd_rdp(args) -> int:
    checkpoints = {}
    for w in _float_list(args.weights):
        out_dir = os.path.join(args.runs_dir, f"w_perc_{w:g}")
        path = os.path.join(out_dir, CHECKPOINT_NAME)
        if not os.path.exists(path):
            cfg = load_experiment(args.config, {"losses": {"w_perc": w}, "output_dir": out_dir})
            path = train(cfg)
        checkpoints[w] = path
    result = rdp_sweep(checkpoints, _int_list(args.budgets))
    result.write_csv(args.out)
    print(args.out)
    return 0


def cmd_enhance(args) -> int:
    models = load_trained(args.ckpt)
    if models.score_net is None:
        logger.error("Checkpoint %s has no enhancement head", args.ckpt)
        return 1
    cfg = models.cfg
    wav = read_wav(args.input, expected_rate=cfg.stft.sample_rate)
    y = pack_tensor(stft_tensor(wav.samples.to(cfg.dtype), cfg.stft)).unsqueeze(0)
    x = reverse_sample(y, models.score_net, cfg.sde, seed=args.seed)
    out = to_waveform(x, cfg.stft, length=len(wav))[0, 0].to(torch.float32)
    write_wav(args.output, Waveform(samples=out, sample_rate=cfg.stft.sample_rate))
    print(args.output)
    return 0


def cmd_plot(args) -> int:
    for path in emit_plots(args.csv, args.out_dir):
        print(path)
    return 0


def cmd_trace(args) -> int:
    params = ChannelParams.from_dict(read_json(args.channel)) if args.channel else ChannelParams()
    tr = read_trace(args.trace)
    write_budget_csv(args.out, tr, budget_trace(tr, params))
    print(args.out)
    if args.plot_dir:
        print(plot_trace(args.out, args.plot_dir))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harness", description="Distributed speech source coding experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one pipeline")
    p.add_argument("--config", default=None, help="JSON experiment config (sections override defaults)")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--perc-weight", type=float, default=None, help="weight of the perceptual loss")
    p.add_argument("--task-agnostic", action="store_true", help="reconstruction terms only")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="PSNR vs total bandwidth")
    p.add_argument("--ckpt", nargs="+", required=True)
    p.add_argument("--budgets", default="8,16,32,64")
    p.add_argument("--variants", default=None, help="comma-separated labels, e.g. E4D1-ndpca,E4D1-local")
    p.add_argument("--out", default="runs/sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rdp", help="distortion vs bandwidth under perception weights")
    p.add_argument("--config", default=None)
    p.add_argument("--weights", default="0,0.1,1.0")
    p.add_argument("--budgets", default="8,16,32,64")
    p.add_argument("--runs-dir", default="runs/rdp")
    p.add_argument("--out", default="runs/rdp.csv")
    p.set_defaults(func=cmd_rdp)

    p = sub.add_parser("enhance", help="run the reverse sampler on a noisy wav")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("plot", help="plot a sweep csv")
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", default="runs/plots")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("trace", help="capacity trace -> dimension budget csv")
    p.add_argument("--trace", required=True, help="csv with time_s,capacity_bps")
    p.add_argument("--channel", default=None, help="JSON with eta, period_T, source_var, quant_dist")
    p.add_argument("--out", default="runs/budget.csv")
    p.add_argument("--plot-dir", default=None)
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

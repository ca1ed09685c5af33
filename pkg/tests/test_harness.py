import csv
import json
import os

import numpy as np
import pytest
import soundfile as sf
import torch

from codec.training import load_checkpoint
from harness import cli
from harness.config import DEFAULT_EXPERIMENT, load_experiment
from harness.plots import emit_plots, plot_trace
from harness.sweeps import SWEEP_COLUMNS, SweepResult, SweepRow, eval_bandwidth_sweep, rdp_sweep
from data.archive import load_cache
from harness.train import BREAKDOWN_NAME, CHECKPOINT_NAME, CONFIG_NAME, load_trained, prepare_splits, train

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _tiny(out_dir, **sections):
    over = {
        "arch": {
            "freq_bins": 9,
            "frames": 4,
            "freq_proj_hidden": 6,
            "freq_proj_out": 4,
            "n_res_blocks": 1,
            "latent_dim": 8,
            "conv_channels": 3,
            "kernel": 3,
        },
        "stft": {"fft_size": 16, "hop": 4, "window": 16, "sample_rate": 16000},
        "data": {"n_clips": 6, "clip_seconds": 0.004},
        "train": {"epochs": 2, "batch_size": 4, "lr": 1e-3, "score_hidden": 4, "eval_t_grid": 2},
        "budgets": [2, 4, 8],
        "output_dir": str(out_dir),
    }
    for name, value in sections.items():
        if isinstance(value, dict):
            over.setdefault(name, {}).update(value)
        else:
            over[name] = value
    return over


def _csv_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _row(variant="E4D1", ndpca=1, budget=8, psnr=10.0, task=1.0, weight=0.0):
    return SweepRow(variant, ndpca, budget, psnr, 0.1, 0.2, -3.0, task, 0.0, weight)


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


class TestExperimentConfig:
    def test_defaults(self):
        cfg = load_experiment()
        assert cfg.pipeline.label == "E4D1-ndpca"
        assert cfg.stft.freq_bins == cfg.arch.freq_bins == 129
        assert cfg.budgets == [8, 16, 32, 64]
        assert cfg.dtype == torch.float32

    def test_repo_config_loads(self):
        cfg = load_experiment(os.path.join(REPO, "config", "experiment.json"))
        assert cfg.arch.latent_dim == DEFAULT_EXPERIMENT["arch"]["latent_dim"]

    def test_overrides_merge_by_section(self):
        cfg = load_experiment(overrides={"train": {"epochs": 3}, "pipeline": {"variant": "E2D1"}})
        assert cfg.epochs == 3
        assert cfg.batch_size == DEFAULT_EXPERIMENT["train"]["batch_size"]
        assert cfg.pipeline.groups == ((0, 1), (2, 3))

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text('{"train": {"epochs": 5, "lr": 0.01}, "last_update": "x"}', encoding="utf-8")
        cfg = load_experiment(str(path), {"train": {"epochs": 7}})
        assert (cfg.epochs, cfg.lr) == (7, 0.01)

    def test_invalid_variant(self):
        with pytest.raises(ValueError, match="pipeline: variant must be one of"):
            load_experiment(overrides={"pipeline": {"variant": "E8D1"}})

    def test_unsorted_budgets(self):
        with pytest.raises(ValueError, match="sorted ascending"):
            load_experiment(overrides={"budgets": [16, 8]})

    def test_bin_mismatch(self):
        with pytest.raises(ValueError, match="bins"):
            load_experiment(overrides={"stft": {"fft_size": 512, "window": 512}})

    def test_bad_dtype(self):
        with pytest.raises(ValueError, match="dtype"):
            load_experiment(overrides={"train": {"dtype": "float16"}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_experiment(str(tmp_path / "none.json"))

    def test_synth_follows_seed(self):
        cfg = load_experiment(overrides={"train": {"seed": 4}, "data": {"n_clips": 3}})
        assert (cfg.synth.seed, cfg.synth.n_clips) == (4, 3)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class TestTrain:
    def test_smoke(self, tmp_path):
        cfg = load_experiment(overrides=_tiny(tmp_path / "run"))
        path = train(cfg)
        assert path == str(tmp_path / "run" / CHECKPOINT_NAME)
        ckpt = load_checkpoint(path)
        assert ckpt["epoch"] == 2
        assert len(ckpt["history"]) == 2
        assert ckpt["pipeline"]["bases"]
        rows = _csv_rows(tmp_path / "run" / BREAKDOWN_NAME)
        assert [int(r["step"]) for r in rows] == [0, 1, 2, 3]
        assert all(float(r["task"]) > 0 for r in rows)

    def test_resume_appends(self, tmp_path):
        out = tmp_path / "run"
        first = train(load_experiment(overrides=_tiny(out, train={"epochs": 1})))
        path = train(load_experiment(overrides=_tiny(out)), resume=first)
        ckpt = load_checkpoint(path)
        assert (ckpt["epoch"], ckpt["step"]) == (2, 4)
        assert [int(r["step"]) for r in _csv_rows(out / BREAKDOWN_NAME)] == [0, 1, 2, 3]

    def test_task_agnostic_has_no_heads(self, tmp_path):
        cfg = load_experiment(overrides=_tiny(tmp_path, losses={"w_task": 0.0}, train={"epochs": 1}))
        models = load_trained(train(cfg))
        assert models.score_net is None and models.disc is None
        assert models.task_context() is None

    def test_e1d1_trains(self, tmp_path):
        cfg = load_experiment(overrides=_tiny(tmp_path, pipeline={"variant": "E1D1"}, train={"epochs": 1}))
        models = load_trained(train(cfg))
        assert len(models.pipeline.encoders) == 1

    def test_resolved_config_written(self, tmp_path):
        out = tmp_path / "run"
        train(load_experiment(overrides=_tiny(out, train={"epochs": 1})))
        written = json.loads((out / CONFIG_NAME).read_text(encoding="utf-8"))
        assert written["last_update"]
        cfg = load_experiment(str(out / CONFIG_NAME))
        assert (cfg.epochs, cfg.arch.latent_dim, cfg.output_dir) == (1, 8, str(out))


class TestSplitCache:
    def test_second_call_reads_archive(self, tmp_path, monkeypatch):
        cfg = load_experiment(overrides=_tiny(tmp_path, data={"cache_dir": str(tmp_path / "cache")}))
        first = prepare_splits(cfg)
        assert sorted(os.listdir(tmp_path / "cache")) == ["test.ndpc", "train.ndpc"]

        def rebuild(_cfg):
            raise AssertionError("splits rebuilt")

        monkeypatch.setattr("harness.train._build_splits", rebuild)
        second = prepare_splits(cfg)
        for a, b in zip(first, second):
            assert torch.equal(a.clean, b.clean) and torch.equal(a.mics, b.mics)

    def test_other_seed_rebuilds(self, tmp_path):
        cache_dir = tmp_path / "cache"
        prepare_splits(load_experiment(overrides=_tiny(tmp_path, data={"cache_dir": str(cache_dir)})))
        reseeded = load_experiment(overrides=_tiny(tmp_path, data={"cache_dir": str(cache_dir)}, train={"seed": 3}))
        train_cache, _ = prepare_splits(reseeded)
        archived, meta = load_cache(str(cache_dir / "train.ndpc"))
        assert meta["seed"] == 3
        assert torch.equal(archived.clean.to(train_cache.clean.dtype), train_cache.clean)

    def test_matches_uncached_splits(self, tmp_path):
        plain = prepare_splits(load_experiment(overrides=_tiny(tmp_path)))
        cached = prepare_splits(load_experiment(overrides=_tiny(tmp_path, data={"cache_dir": str(tmp_path / "c")})))
        for a, b in zip(plain, cached):
            assert torch.equal(a.mics, b.mics)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


class TestSweeps:
    def test_bandwidth_sweep(self, tmp_path):
        ckpt = train(load_experiment(overrides=_tiny(tmp_path / "e4", train={"epochs": 1})))
        result = eval_bandwidth_sweep([ckpt], [2, 4, 8, 16])
        labels = {(r.variant, r.ndpca) for r in result.rows}
        assert labels == {("E4D1", 1), ("E4D1", 0)}
        assert sorted({r.budget for r in result.rows}) == [2, 4, 8]
        full = [r for r in result.rows if r.budget == 8]
        assert full[0].psnr_db == pytest.approx(full[1].psnr_db)

    def test_variant_filter(self, tmp_path):
        ckpt = train(load_experiment(overrides=_tiny(tmp_path / "e4", train={"epochs": 1})))
        result = eval_bandwidth_sweep([ckpt], [2, 4], variants=["E4D1-local"])
        assert {r.ndpca for r in result.rows} == {0}

    def test_same_variant_twice_is_rejected(self, tmp_path):
        aware = train(load_experiment(overrides=_tiny(tmp_path / "aware", train={"epochs": 1})))
        agnostic = train(load_experiment(overrides=_tiny(tmp_path / "agnostic", losses={"w_task": 0.0}, train={"epochs": 1})))
        with pytest.raises(ValueError, match="E4D1-ndpca comes from both"):
            eval_bandwidth_sweep([aware, agnostic], [2, 4])
        only_ndpca = eval_bandwidth_sweep([aware], [2, 4], variants=["E4D1-ndpca"])
        only_local = eval_bandwidth_sweep([agnostic], [2, 4], variants=["E4D1-local"])
        assert len(only_ndpca) == len(only_local) == 2

    def test_rdp_missing_checkpoint(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="perception weight 0.1"):
            rdp_sweep({0.1: str(tmp_path / "none.pt")}, [4])

    def test_rdp_needs_enhancer(self, tmp_path):
        ckpt = train(load_experiment(overrides=_tiny(tmp_path, losses={"w_task": 0.0}, train={"epochs": 1})))
        with pytest.raises(ValueError, match="enhancement head"):
            rdp_sweep({0.0: ckpt}, [4])

    def test_csv_round_trip(self, tmp_path):
        result = SweepResult([_row(budget=16), _row(ndpca=0, budget=8), _row(variant="E1D1", budget=8)])
        path = str(tmp_path / "sweep.csv")
        result.write_csv(path)
        with open(path, encoding="utf-8") as fh:
            assert fh.readline().strip() == ",".join(SWEEP_COLUMNS)
        back = SweepResult.read_csv(path)
        assert back.rows == result.rows

    def test_series_sorted_by_budget(self):
        result = SweepResult([_row(budget=16, psnr=12.0), _row(budget=8, psnr=9.0), _row(variant="E1D1", budget=8)])
        series = result.series()
        assert series["NDPCA E4D1"] == ([8, 16], [9.0, 12.0])
        assert "Joint E1D1" in series


# ---------------------------------------------------------------------------
# Plots and CLI
# ---------------------------------------------------------------------------


class TestPlots:
    def test_psnr_plot_is_deterministic(self, tmp_path):
        path = str(tmp_path / "sweep.csv")
        SweepResult([_row(budget=8), _row(budget=16, psnr=12.0)]).write_csv(path)
        first = emit_plots(path, str(tmp_path / "a"))
        second = emit_plots(path, str(tmp_path / "b"))
        assert [os.path.basename(p) for p in first] == ["sweep_psnr.png"]
        with open(first[0], "rb") as fa, open(second[0], "rb") as fb:
            assert fa.read() == fb.read()

    def test_rdp_plot_with_several_weights(self, tmp_path):
        path = str(tmp_path / "rdp.csv")
        SweepResult([_row(weight=0.0), _row(weight=1.0, task=2.0)]).write_csv(path)
        names = [os.path.basename(p) for p in emit_plots(path, str(tmp_path / "out"))]
        assert names == ["rdp_psnr.png", "rdp_rdp.png"]

    def test_empty_sweep(self, tmp_path):
        path = str(tmp_path / "empty.csv")
        SweepResult().write_csv(path)
        with pytest.raises(ValueError, match="no sweep rows"):
            emit_plots(path, str(tmp_path))

    def test_trace_plot(self, tmp_path):
        budget_csv = tmp_path / "budget.csv"
        budget_csv.write_text("time_s,capacity_bps,budget\n0,40,20\n1,80,40\n", encoding="utf-8")
        out = plot_trace(str(budget_csv), str(tmp_path / "plots"))
        assert os.path.basename(out) == "capacity_budget.png"
        assert os.path.getsize(out) > 0


class TestCli:
    @pytest.fixture(autouse=True)
    def _quiet(self, monkeypatch):
        monkeypatch.setattr(cli, "configure_logging", lambda: None)

    def test_trace(self, tmp_path, capsys):
        out = str(tmp_path / "budget.csv")
        code = cli.main(["trace", "--trace", os.path.join(REPO, "config", "capacity_trace.csv"), "--out", out])
        assert code == 0
        assert capsys.readouterr().out.strip() == out
        rows = _csv_rows(out)
        assert len(rows) == 20
        assert all(int(r["budget"]) == int(float(r["capacity_bps"])) for r in rows)

    def test_train_then_enhance(self, tmp_path):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(_tiny(tmp_path / "run", sde={"n_steps": 3})), encoding="utf-8")
        assert cli.main(["train", "--config", str(cfg_path), "--epochs", "1"]) == 0
        ckpt = str(tmp_path / "run" / CHECKPOINT_NAME)
        noisy = str(tmp_path / "noisy.wav")
        sf.write(noisy, np.random.default_rng(0).uniform(-0.3, 0.3, 64).astype(np.float32), 16000)
        enhanced = str(tmp_path / "clean.wav")
        assert cli.main(["enhance", "--ckpt", ckpt, "--in", noisy, "--out", enhanced]) == 0
        data, rate = sf.read(enhanced)
        assert rate == 16000
        assert len(data) == 64

    def test_enhance_without_head(self, tmp_path):
        cfg = load_experiment(overrides=_tiny(tmp_path, losses={"w_task": 0.0}, train={"epochs": 1}))
        ckpt = train(cfg)
        assert cli.main(["enhance", "--ckpt", ckpt, "--in", "x.wav", "--out", "y.wav"]) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            cli.main(["bogus"])

import json
import math

import numpy as np
import pytest
import soundfile as sf
import torch

from data.archive import MAGIC, load_cache, save_cache
from data.batching import batch_iter, fit_frames, full_batch, iter_cache, spectral_cache
from data.corpus import MultiSourceDataset, MultiSourceItem, pairwise_correlation, split_dataset
from data.segmented import SegmentAnnotation, load_segmented_corpus, parse_annotations
from data.synth import SynthConfig, synth_corpus


def _segment(**kw):
    seg = {
        "session": "s01",
        "speaker": "p1",
        "start_s": 0.1,
        "end_s": 0.35,
        "clean_wav": "worn.wav",
        "mic_wavs": ["mic_a.wav", "mic_b.wav"],
    }
    seg.update(kw)
    return seg


@pytest.fixture
def wav_dir(tmp_path):
    rng = np.random.default_rng(0)
    audio = {
        "worn.wav": rng.uniform(-0.5, 0.5, 16000),
        "mic_a.wav": rng.uniform(-0.5, 0.5, 16000),
        "mic_b.wav": rng.uniform(-0.5, 0.5, 8000),
    }
    for name, x in audio.items():
        sf.write(str(tmp_path / name), x.astype(np.float32), 16000, subtype="FLOAT")
    return tmp_path, {k: v.astype(np.float32) for k, v in audio.items()}


def _write_annotations(folder, entries):
    path = folder / "segments.json"
    path.write_text(json.dumps(entries), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------


class TestSynthCorpus:
    def test_shapes(self, small_corpus):
        assert len(small_corpus) == 6
        assert small_corpus.n_sources == 4
        item = small_corpus.items[0]
        assert item.clean.shape == (1024,)
        assert item.mics.shape == (4, 1024)

    def test_deterministic(self):
        a = synth_corpus(SynthConfig(n_clips=2, seed=9))
        b = synth_corpus(SynthConfig(n_clips=2, seed=9))
        c = synth_corpus(SynthConfig(n_clips=2, seed=10))
        assert torch.equal(a.items[1].mics, b.items[1].mics)
        assert not torch.equal(a.items[1].mics, c.items[1].mics)

    def test_noiseless_mics_equal_clean(self):
        cfg = SynthConfig(n_clips=2, gain_range=(1.0, 1.0), delay_range=(0, 0), noise_weight=0.0)
        for item in synth_corpus(cfg).items:
            for mic in item.mics:
                assert torch.equal(mic, item.clean)

    def test_snr_matches_meta(self, small_corpus):
        for item in small_corpus.items:
            for s, mic in enumerate(item.mics.numpy()):
                gain, delay = item.meta["gains"][s], item.meta["delays"][s]
                clean = item.clean.numpy()
                signal = gain * np.concatenate([np.zeros(delay), clean[: len(clean) - delay]])
                noise = mic - signal
                snr = 10 * math.log10(np.sum(signal ** 2) / np.sum(noise ** 2))
                assert snr == pytest.approx(item.meta["snr_db"][s], abs=0.5)
                assert 10.0 <= item.meta["snr_db"][s] <= 20.0

    def test_mics_are_correlated(self, small_corpus):
        corr = [pairwise_correlation(item.mics) for item in small_corpus.items]
        assert sum(corr) / len(corr) > 0.5

    def test_bad_delay_range(self):
        with pytest.raises(ValueError, match="delay range"):
            SynthConfig(delay_range=(3, 1))

    def test_from_dict_lists(self):
        cfg = SynthConfig.from_dict({"snr_range_db": [5, 6], "n_clips": 3, "extra": True})
        assert cfg.snr_range_db == (5, 6)
        assert cfg.n_clips == 3


class TestCorpus:
    def test_misaligned_item(self):
        with pytest.raises(ValueError, match="not aligned"):
            MultiSourceItem(clean=torch.zeros(10), mics=torch.zeros(2, 9))

    def test_varying_source_count(self):
        items = [
            MultiSourceItem(clean=torch.zeros(4), mics=torch.zeros(2, 4)),
            MultiSourceItem(clean=torch.zeros(4), mics=torch.zeros(3, 4)),
        ]
        with pytest.raises(ValueError, match="source count varies"):
            MultiSourceDataset(items)

    def test_split(self, small_corpus):
        train, test = split_dataset(small_corpus, 0.8, seed=1)
        assert (len(train), len(test)) == (5, 1)
        clips = [item.meta["clip"] for item in train.items + test.items]
        assert sorted(clips) == list(range(6))
        again, _ = split_dataset(small_corpus, 0.8, seed=1)
        assert [i.meta["clip"] for i in again.items] == [i.meta["clip"] for i in train.items]

    def test_split_fraction(self, small_corpus):
        with pytest.raises(ValueError, match="train_fraction"):
            split_dataset(small_corpus, 1.0)


# ---------------------------------------------------------------------------
# Segmented recordings
# ---------------------------------------------------------------------------


class TestSegmentedCorpus:
    def test_sample_range_rounds(self):
        seg = SegmentAnnotation.from_dict(_segment(start_s=0.00003, end_s=1.0))
        assert seg.sample_range(16000) == (0, 16000)

    def test_load(self, wav_dir):
        folder, audio = wav_dir
        ds = load_segmented_corpus(_write_annotations(folder, [_segment()]), str(folder))
        assert len(ds) == 1
        item = ds.items[0]
        assert item.clean.shape == (4000,)
        assert item.mics.shape == (2, 4000)
        assert np.array_equal(item.clean.numpy(), audio["worn.wav"][1600:5600])
        assert np.array_equal(item.mics[0].numpy(), audio["mic_a.wav"][1600:5600])
        assert item.meta == {"session": "s01", "speaker": "p1", "start": 1600, "end": 5600}

    def test_short_mic_is_padded(self, wav_dir):
        folder, audio = wav_dir
        ds = load_segmented_corpus(_write_annotations(folder, [_segment(start_s=0.4, end_s=0.6)]), str(folder))
        mic_b = ds.items[0].mics[1].numpy()
        assert np.array_equal(mic_b[:1600], audio["mic_b.wav"][6400:8000])
        assert np.all(mic_b[1600:] == 0)

    def test_overlap_skipped(self, wav_dir):
        folder, _ = wav_dir
        entries = [_segment(), _segment(start_s=0.3, end_s=0.5), _segment(speaker="p2", start_s=0.3, end_s=0.5)]
        ds = load_segmented_corpus(_write_annotations(folder, entries), str(folder))
        assert [item.meta["speaker"] for item in ds.items] == ["p1", "p2"]

    def test_malformed_skipped(self):
        segs = parse_annotations([_segment(), {"session": "s01"}, _segment(start_s=0.5, end_s=0.4)])
        assert len(segs) == 1

    def test_missing_wav_names_segment(self, wav_dir):
        folder, _ = wav_dir
        path = _write_annotations(folder, [_segment(mic_wavs=["mic_a.wav", "gone.wav"])])
        with pytest.raises(FileNotFoundError, match="s01/p1@0.100-0.350"):
            load_segmented_corpus(path, str(folder))

    def test_end_beyond_clean(self, wav_dir):
        folder, _ = wav_dir
        path = _write_annotations(folder, [_segment(start_s=0.9, end_s=1.5)])
        with pytest.raises(ValueError, match="clean wav has 16000 samples"):
            load_segmented_corpus(path, str(folder))

    def test_missing_annotations(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_segmented_corpus(str(tmp_path / "none.json"), str(tmp_path))


# ---------------------------------------------------------------------------
# Spectral batches
# ---------------------------------------------------------------------------


class TestBatching:
    def test_fit_frames(self):
        t = torch.ones(2, 3, 5)
        assert fit_frames(t, 4).shape == (2, 3, 4)
        padded = fit_frames(t, 7)
        assert padded.shape == (2, 3, 7)
        assert torch.all(padded[..., 5:] == 0)

    def test_cache_shapes(self, small_corpus, stft_cfg):
        cache = spectral_cache(small_corpus, stft_cfg, frames=16)
        assert cache.clean.shape == (6, 2, 129, 16)
        assert cache.mics.shape == (6, 4, 2, 129, 16)
        assert cache.n_sources == 4
        assert torch.all(cache.clean[:, 0] >= 0)

    def test_epoch_covers_everything(self, small_corpus, stft_cfg):
        cache = spectral_cache(small_corpus, stft_cfg, frames=16)
        batches = list(iter_cache(cache, batch_size=4, seed=0))
        assert [b[0].shape[0] for b in batches] == [4, 2]
        assert all(len(sources) == 4 for _, sources in batches)
        seen = torch.cat([clean for clean, _ in batches])
        assert torch.allclose(seen.sum(dim=0), cache.clean.sum(dim=0))

    def test_seeded_order(self, small_corpus, stft_cfg):
        cache = spectral_cache(small_corpus, stft_cfg, frames=16)
        a = next(iter_cache(cache, 3, seed=5))[0]
        b = next(iter_cache(cache, 3, seed=5))[0]
        assert torch.equal(a, b)

    def test_batch_iter_from_dataset(self, small_corpus, stft_cfg):
        direct = list(batch_iter(small_corpus, 1, seed=2, stft_cfg=stft_cfg, frames=16))
        cached = list(iter_cache(spectral_cache(small_corpus, stft_cfg, 16), 1, seed=2))
        assert len(direct) == 6
        assert all(torch.equal(a[0], b[0]) for a, b in zip(direct, cached))
        assert direct[0][1][0].shape == (1, 2, 129, 16)

    def test_full_batch(self, small_corpus, stft_cfg):
        cache = spectral_cache(small_corpus, stft_cfg, frames=16)
        clean, sources = full_batch(cache)
        assert clean is cache.clean
        assert torch.equal(sources[2], cache.mics[:, 2])

    def test_empty_dataset(self, stft_cfg):
        with pytest.raises(ValueError, match="empty"):
            spectral_cache(MultiSourceDataset([]), stft_cfg, 16)


class TestArchive:
    def test_save_and_load(self, tmp_path, small_corpus, stft_cfg):
        cache = spectral_cache(small_corpus, stft_cfg, frames=16)
        path = str(tmp_path / "cache" / "train.ndpc")
        save_cache(path, cache, {"split": "train"})
        with open(path, "rb") as fh:
            assert fh.read(len(MAGIC)) == MAGIC
        back, meta = load_cache(path)
        assert torch.equal(back.mics, cache.mics)
        assert meta == {"split": "train"}

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ndpc"
        path.write_bytes(b"NOPE!" + b"\x00" * 16)
        with pytest.raises(ValueError, match="bad magic"):
            load_cache(str(path))

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_cache(str(tmp_path / "none.ndpc"))

"""WAV file access (PCM 16-bit / float32)."""

from __future__ import annotations

import logging
import os

import numpy as np
import soundfile as sf
import torch

from dsp.stft import Waveform

logger = logging.getLogger(__name__)


def read_wav(path: str, expected_rate: int | None = 16000) -> Waveform:
    if not os.path.exists(path):
        raise FileNotFoundError(f"wav not found: {path}")
    audio, rate = sf.read(path, dtype="float32", always_2d=False)
    if audio.ndim > 1:
        logger.warning("Multichannel wav %s, keeping channel 0", path)
        audio = audio[:, 0]
    if expected_rate is not None and rate != expected_rate:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    return Waveform(samples=torch.from_numpy(np.ascontiguousarray(audio)), sample_rate=int(rate))


def write_wav(path: str, w: Waveform) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    sf.write(path, w.samples.detach().cpu().numpy().astype(np.float32), w.sample_rate, subtype="FLOAT")

"""Loader for segment-annotated multi-microphone recordings.

The annotation file is a JSON array of
``{session, speaker, start_s, end_s, clean_wav, mic_wavs: [...]}``; wav paths are relative
to ``wav_dir``. Each segment yields the worn-mic clean clip and one clip per room mic.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import torch
import torch.nn.functional as F

from config.config_store import read_json
from config.validators import validate_segment
from data.corpus import MultiSourceDataset, MultiSourceItem
from dsp.wav import read_wav

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentAnnotation:
    session: str
    speaker: str
    start_s: float
    end_s: float
    clean_wav: str
    mic_wavs: Tuple[str, ...]

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(f"segment {self.label}: end {self.end_s} s must exceed start {self.start_s} s")

    @classmethod
    def from_dict(cls, raw: dict) -> "SegmentAnnotation":
        return cls(
            session=str(raw["session"]),
            speaker=str(raw["speaker"]),
            start_s=float(raw["start_s"]),
            end_s=float(raw["end_s"]),
            clean_wav=str(raw["clean_wav"]),
            mic_wavs=tuple(str(p) for p in raw["mic_wavs"]),
        )

    @property
    def label(self) -> str:
        return f"{self.session}/{self.speaker}@{self.start_s:.3f}-{self.end_s:.3f}"

    def sample_range(self, sample_rate: int) -> Tuple[int, int]:
        return int(round(self.start_s * sample_rate)), int(round(self.end_s * sample_rate))


def _overlaps(seg: SegmentAnnotation, accepted: List[SegmentAnnotation]) -> bool:
    for other in accepted:
        if (other.session, other.speaker) != (seg.session, seg.speaker):
            continue
        if seg.start_s < other.end_s and other.start_s < seg.end_s:
            return True
    return False


def parse_annotations(raw: list) -> List[SegmentAnnotation]:
    """Malformed or overlapping entries are skipped with a warning."""
    if not isinstance(raw, list):
        raise ValueError("annotation file must hold a JSON array")
    accepted: List[SegmentAnnotation] = []
    for idx, entry in enumerate(raw):
        err = validate_segment(entry) if isinstance(entry, dict) else "entry is not an object"
        if err:
            logger.warning("Skipping segment index=%d: %s", idx, err)
            continue
        seg = SegmentAnnotation.from_dict(entry)
        if _overlaps(seg, accepted):
            logger.warning("Skipping segment index=%d %s: overlaps an earlier segment", idx, seg.label)
            continue
        accepted.append(seg)
    return accepted


class _WavCache:
    def __init__(self, wav_dir: str, sample_rate: int):
        self.wav_dir = wav_dir
        self.sample_rate = sample_rate
        self._audio: Dict[str, torch.Tensor] = {}

    def get(self, rel: str, seg: SegmentAnnotation) -> torch.Tensor:
        if rel not in self._audio:
            path = os.path.join(self.wav_dir, rel)
            if not os.path.exists(path):
                raise FileNotFoundError(f"segment {seg.label}: wav not found: {path}")
            self._audio[rel] = read_wav(path, expected_rate=self.sample_rate).samples
        return self._audio[rel]


def _cut(audio: torch.Tensor, start: int, end: int) -> torch.Tensor:
    clip = audio[start:end]
    return F.pad(clip, (0, (end - start) - clip.shape[0]))


def load_segmented_corpus(annotations_path: str, wav_dir: str, sample_rate: int = 16000) -> MultiSourceDataset:
    if not os.path.exists(annotations_path):
        raise FileNotFoundError(f"annotation file not found: {annotations_path}")
    segments = parse_annotations(read_json(annotations_path))
    wavs = _WavCache(wav_dir, sample_rate)
    items = []
    for seg in segments:
        start, end = seg.sample_range(sample_rate)
        clean = wavs.get(seg.clean_wav, seg)
        if end > clean.shape[0]:
            raise ValueError(
                f"segment {seg.label}: ends at sample {end}, clean wav has {clean.shape[0]} samples"
            )
        mics = []
        for rel in seg.mic_wavs:
            audio = wavs.get(rel, seg)
            if end > audio.shape[0]:
                logger.warning("Segment %s: mic %s short by %d samples, zero-padding", seg.label, rel, end - audio.shape[0])
            mics.append(_cut(audio, start, end))
        items.append(
            MultiSourceItem(
                clean=clean[start:end].clone(),
                mics=torch.stack(mics),
                meta={"session": seg.session, "speaker": seg.speaker, "start": start, "end": end},
            )
        )
    logger.info("Loaded segmented corpus segments=%d from %s", len(items), annotations_path)
    return MultiSourceDataset(items=items, sample_rate=sample_rate)

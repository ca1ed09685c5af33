"""Single-file spectral cache per split: the bytes ``NDPC1`` followed by a torch archive."""

from __future__ import annotations

import io
import logging
import os

import torch

from data.batching import SpectralCache

logger = logging.getLogger(__name__)

MAGIC = b"NDPC1"


def save_cache(path: str, cache: SpectralCache, meta: dict | None = None) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    buf = io.BytesIO()
    torch.save({"clean": cache.clean, "mics": cache.mics, "meta": dict(meta or {})}, buf)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(buf.getvalue())
    os.replace(tmp, path)
    logger.info("Archived spectral cache items=%d to %s", len(cache), path)


def load_cache(path: str) -> tuple[SpectralCache, dict]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"cache archive not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head != MAGIC:
            raise ValueError(f"{path}: bad magic {head!r}, expected {MAGIC!r}")
        payload = torch.load(io.BytesIO(fh.read()), map_location="cpu", weights_only=False)
    return SpectralCache(clean=payload["clean"], mics=payload["mics"]), payload.get("meta", {})

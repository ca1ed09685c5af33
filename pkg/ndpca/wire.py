"""Byte layout of one transmitted CompressedBlock.

    uint16 n_sources | (uint16 source_id, uint16 k) * n_sources | float32 LE coefficients
"""

from __future__ import annotations

import struct

import numpy as np
import torch

from ndpca.allocation import BandwidthAllocation, CompressedBlock

_COUNT = struct.Struct("<H")
_ENTRY = struct.Struct("<HH")


def encode_block(block: CompressedBlock) -> bytes:
    ids = block.allocation.source_ids
    parts = [_COUNT.pack(len(ids))]
    for sid in ids:
        parts.append(_ENTRY.pack(sid, block.allocation.per_source[sid]))
    for sid in ids:
        c = block.coeffs[sid]
        if c.ndim != 1:
            raise ValueError(f"encode one sample at a time, source {sid} has shape {tuple(c.shape)}")
        parts.append(c.detach().cpu().numpy().astype("<f4").tobytes())
    return b"".join(parts)


def decode_block(payload: bytes) -> CompressedBlock:
    if len(payload) < _COUNT.size:
        raise ValueError("payload shorter than header")
    (count,) = _COUNT.unpack_from(payload, 0)
    offset = _COUNT.size
    per_source = {}
    for _ in range(count):
        sid, k = _ENTRY.unpack_from(payload, offset)
        offset += _ENTRY.size
        per_source[sid] = k
    expected = offset + 4 * sum(per_source.values())
    if len(payload) != expected:
        raise ValueError(f"payload is {len(payload)} bytes, header implies {expected}")
    coeffs = {}
    for sid in sorted(per_source):
        k = per_source[sid]
        values = np.frombuffer(payload, dtype="<f4", count=k, offset=offset)
        coeffs[sid] = torch.from_numpy(values.astype(np.float32))
        offset += 4 * k
    alloc = BandwidthAllocation(per_source=per_source, budget=sum(per_source.values()))
    return CompressedBlock(coeffs=coeffs, allocation=alloc)


def payload_bits(block: CompressedBlock) -> int:
    """Raw float32 payload size before entropy coding (header included)."""
    return 8 * (_COUNT.size + _ENTRY.size * len(block.allocation.per_source) + 4 * block.transmitted)

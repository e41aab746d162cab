"""Fixed-width bit packing of unsigned integer codes.

Codes are laid out LSB-first as one continuous little-endian bit stream,
which is the same byte image as packing LSB-first into little-endian
64-bit words and truncating to ``ceil(n * width / 8)`` bytes.
"""
from __future__ import annotations

import numpy as np


def packed_size(count: int, width: int) -> int:
    return (count * width + 7) // 8


def pack(codes: np.ndarray, width: int) -> bytes:
    if not 1 <= width <= 32:
        raise ValueError(f"width {width} outside [1, 32]")
    codes = np.asarray(codes, dtype=np.uint32)
    if codes.size == 0:
        return b""
    if width < 32 and int(codes.max()) >> width:
        raise ValueError(f"code does not fit in {width} bits")
    shifts = np.arange(width, dtype=np.uint32)
    bits = ((codes[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def unpack(data: bytes, count: int, width: int) -> np.ndarray:
    """Inverse of :func:`pack`; returns ``count`` codes as 32-bit lanes."""
    if not 1 <= width <= 32:
        raise ValueError(f"width {width} outside [1, 32]")
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    raw = np.frombuffer(data, dtype=np.uint8, count=packed_size(count, width))
    bits = np.unpackbits(raw, bitorder="little", count=count * width)
    bits = bits.reshape(count, width).astype(np.uint32)
    weights = np.left_shift(np.uint32(1), np.arange(width, dtype=np.uint32))
    return (bits * weights).sum(axis=1, dtype=np.uint64).astype(np.uint32)

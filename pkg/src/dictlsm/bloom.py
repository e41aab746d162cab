"""Per-block bloom filters over fixed-width keys.

Keys are hashed with a vectorized 128-bit mix (two independent 64-bit
lanes); probe positions use double hashing ``h1 + i*h2 mod nbits``.
"""
from __future__ import annotations

import math

import numpy as np

_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_SEEDS = (np.uint64(0x9E3779B97F4A7C15), np.uint64(0xD6E8FEB86659FD93))


def _fmix(h: np.ndarray) -> np.ndarray:
    h ^= h >> np.uint64(33)
    h *= _M1
    h ^= h >> np.uint64(33)
    h *= _M2
    h ^= h >> np.uint64(33)
    return h


def hash128(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hash an array of fixed-width byte keys (numpy ``S<n>``) to two u64 lanes."""
    keys = np.asarray(keys)
    n = keys.shape[0]
    width = keys.dtype.itemsize
    words = -(-width // 8)
    buf = np.zeros((n, words * 8), dtype=np.uint8)
    buf[:, :width] = keys.view(np.uint8).reshape(n, width)
    lanes = buf.view("<u8")
    out = []
    with np.errstate(over="ignore"):
        for seed in _SEEDS:
            h = np.full(n, seed ^ np.uint64(width), dtype=np.uint64)
            for w in range(words):
                h = _fmix(h ^ lanes[:, w]) * np.uint64(5) + seed
            out.append(_fmix(h))
    return out[0], out[1]


def filter_bits(n_keys: int, bits_per_key: int) -> int:
    return max(64, ((n_keys * bits_per_key + 7) // 8) * 8)


def _positions(keys: np.ndarray, nbits: int, k: int) -> np.ndarray:
    h1, h2 = hash128(keys)
    steps = np.arange(k, dtype=np.uint64)
    with np.errstate(over="ignore"):
        pos = h1[:, None] + steps[None, :] * (h2[:, None] | np.uint64(1))
    return (pos % np.uint64(nbits)).astype(np.int64)


def build(keys: np.ndarray, bits_per_key: int, k: int) -> bytes:
    nbits = filter_bits(len(keys), bits_per_key)
    bits = np.zeros(nbits, dtype=np.uint8)
    if len(keys):
        bits[_positions(keys, nbits, k).ravel()] = 1
    return np.packbits(bits, bitorder="little").tobytes()


def may_contain(bloom: bytes, key: bytes, k: int, key_size: int) -> bool:
    nbits = len(bloom) * 8
    arr = np.array([key], dtype=f"S{key_size}")
    pos = _positions(arr, nbits, k)[0]
    raw = np.frombuffer(bloom, dtype=np.uint8)
    return bool(np.all((raw[pos >> 3] >> (pos & 7).astype(np.uint8)) & 1))


def expected_fpr(n_keys: int, nbits: int, k: int) -> float:
    if n_keys == 0:
        return 0.0
    return (1.0 - math.exp(-k * n_keys / nbits)) ** k

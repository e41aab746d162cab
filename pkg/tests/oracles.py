"""Reference implementations the tests compare against.

Each oracle is written independently of the package code: plain Python
loops over tuples, no numpy tricks, no shared helpers.
"""
from __future__ import annotations

import os
import random
from collections import Counter, defaultdict

import numpy as np

from dictlsm.dictionary import OrderPreservingDictionary
from dictlsm.rows import Kind, RowBatch, key_dtype
from dictlsm.sct import LAYOUT_ENCODED, SctReader, write_sct


def pack_bits(codes, width: int) -> bytes:
    """LSB-first bit stream, one bit at a time."""
    acc, nbits, out = 0, 0, bytearray()
    for c in codes:
        acc |= int(c) << nbits
        nbits += width
        while nbits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            nbits -= 8
    if nbits:
        out.append(acc & 0xFF)
    return bytes(out)


def gc_oracle(rows, oldest: int, bottom: bool):
    """Surviving (key, seq, kind, value) rows.

    A version is kept when some read at or after ``oldest`` can see it as
    the newest version, i.e. it has no newer version or its next newer
    version is itself newer than ``oldest``.  At the bottom, a tombstone
    every reader sees is the same as no row at all.
    """
    by_key = defaultdict(list)
    for r in rows:
        by_key[r[0]].append(r)
    out = []
    for key in sorted(by_key):
        versions = sorted(by_key[key], key=lambda r: -r[1])
        for i, v in enumerate(versions):
            newer = versions[i - 1][1] if i else None
            if newer is not None and newer <= oldest:
                continue
            if bottom and v[2] == Kind.TOMBSTONE and v[1] <= oldest:
                continue
            out.append(v)
    return out


def decode_file(path: str):
    """All rows of an SCT as (key, seq, kind, value-or-None) tuples."""
    with SctReader(path) as r:
        b = r.read_all()
        d = r.desc.dictionary
        ks = r.desc.key_size
    out = []
    for i in range(len(b)):
        kind = Kind(int(b.kinds[i]))
        key = bytes(b.keys[i]).ljust(ks, b"\x00")
        if kind == Kind.TOMBSTONE:
            val = None
        elif b.values is not None:
            val = b.values[i]
        else:
            val = d.values[int(b.codes[i])]
        out.append((key, int(b.seqs[i]), kind, val))
    return out


def make_batch(rows, key_size: int) -> RowBatch:
    rows = sorted(rows, key=lambda r: (r[0], -r[1]))
    n = len(rows)
    keys = np.array([r[0] for r in rows], dtype=key_dtype(key_size))
    seqs = np.array([r[1] for r in rows], dtype=np.uint64)
    kinds = np.array([int(r[2]) for r in rows], dtype=np.uint8)
    values = np.empty(n, dtype=object)
    values[:] = [r[3] if r[3] is not None else b"" for r in rows]
    return RowBatch(keys, seqs, kinds, values=values)


def write_rows(rows, path: str, sct_id: int, key_size: int = 16, layout: int = LAYOUT_ENCODED):
    batch = make_batch(rows, key_size)
    d = None
    if layout == LAYOUT_ENCODED:
        d = OrderPreservingDictionary.build([r[3] for r in rows if r[2] == Kind.PUT])
    return write_sct(batch, path, sct_id=sct_id, dictionary=d, layout=layout, fsync=False)


def random_value(rng: random.Random, lo: int = 1, hi: int = 24) -> bytes:
    return bytes(rng.randrange(256) for _ in range(rng.randint(lo, hi)))


def random_key(rng: random.Random, universe: int, key_size: int = 16) -> bytes:
    k = rng.randrange(universe)
    # every eighth key ends in NUL bytes, which fixed-width numpy strings strip
    return (k * 256).to_bytes(key_size, "big") if k % 8 == 0 else k.to_bytes(key_size, "big")


def random_job_files(rng: random.Random, tmpdir: str, n_files: int, rows_per_file: list[int],
                     ndv_frac: float, tomb_frac: float = 0.15, key_size: int = 16, first_id: int = 1):
    """Write ``n_files`` SCTs sharing keys; seqs are unique across all files."""
    total = sum(rows_per_file)
    pool = [random_value(rng) for _ in range(max(1, int(total * ndv_frac)))]
    universe = max(4, int(total * rng.uniform(0.3, 1.2)))
    seqs = rng.sample(range(1, total * 4 + 10), total)
    all_rows, paths, it = [], [], iter(seqs)
    for f, n in enumerate(rows_per_file):
        rows = []
        for _ in range(n):
            k = random_key(rng, universe, key_size)
            if rng.random() < tomb_frac:
                rows.append((k, next(it), Kind.TOMBSTONE, None))
            else:
                rows.append((k, next(it), Kind.PUT, rng.choice(pool)))
        path = os.path.join(tmpdir, f"in_{first_id + f}.sct")
        write_rows(rows, path, first_id + f, key_size)
        paths.append(path)
        all_rows.extend(rows)
    return paths, all_rows


def multiset(rows) -> Counter:
    return Counter((r[0], r[1], int(r[2]), r[3]) for r in rows)


class MvccOracle:
    """Reference store: per key, every (seq, value-or-None) ever written."""

    def __init__(self) -> None:
        self.versions: dict[bytes, list[tuple[int, bytes | None]]] = defaultdict(list)

    def put(self, key: bytes, value: bytes, seq: int) -> None:
        self.versions[key].append((seq, value))

    def delete(self, key: bytes, seq: int) -> None:
        self.versions[key].append((seq, None))

    def get(self, key: bytes, read_seq: int) -> bytes | None:
        best = None
        for s, v in self.versions.get(key, ()):
            if s <= read_seq and (best is None or s > best[0]):
                best = (s, v)
        return None if best is None else best[1]

    def state(self, read_seq: int) -> dict[bytes, bytes]:
        out = {}
        for k in self.versions:
            v = self.get(k, read_seq)
            if v is not None:
                out[k] = v
        return out

    def scan(self, lo: bytes, hi: bytes, read_seq: int) -> list[tuple[bytes, bytes]]:
        return sorted((k, v) for k, v in self.state(read_seq).items() if lo <= k < hi)

    def filter(self, pred, read_seq: int) -> list[tuple[bytes, bytes]]:
        return sorted((k, v) for k, v in self.state(read_seq).items() if pred.matches(v))


def small_config(**kw):
    """Tiny memtables and files so a few thousand writes span several levels."""
    from dictlsm.config import EngineConfig
    base = dict(memtable_capacity=4096, file_size=32768, size_ratio=2, max_levels=5,
                l0_compaction_trigger=2, l0_stall_threshold=8, fsync=False)
    base.update(kw)
    return EngineConfig(**base)


def random_value_pool(rng: random.Random, ndv: int) -> list[bytes]:
    return [bytes([rng.choice(b"abcd")]) + bytes(rng.choice(b"abcdef") for _ in range(rng.randint(0, 9)))
            for _ in range(ndv)]


def drive(engine, oracle: MvccOracle, rng: random.Random, n_ops: int, universe: int, pool: list[bytes],
          delete_frac: float = 0.15) -> None:
    """Random puts and deletes applied to both the engine and the oracle."""
    for _ in range(n_ops):
        key = random_key(rng, universe)
        if rng.random() < delete_frac:
            seq = engine.delete(key)
            oracle.delete(key, seq)
        else:
            v = rng.choice(pool)
            seq = engine.put(key, v)
            oracle.put(key, v, seq)


def random_predicate(rng: random.Random, pool: list[bytes]):
    from dictlsm.predicates import Equality, Prefix, Range
    kind = rng.random()
    if kind < 0.3:
        return Equality(rng.choice(pool) if rng.random() < 0.8 else b"zz-not-there")
    if kind < 0.6:
        v = rng.choice(pool)
        return Prefix(v[:rng.randint(0, min(3, len(v)))])
    a, b = sorted((rng.choice(pool), rng.choice(pool)))
    return Range(a, b)

"""Reads over a pinned view: point lookups, range scans and value filters.

A :class:`ReadView` is what a snapshot pins: a read sequence number, the
memtables newest first, and the SCT readers of every level (level 0
newest first, deeper levels in key order).  For any key, a source earlier
in that order always holds newer versions than any later source.
"""
from __future__ import annotations

import bisect
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .memtable import TOMBSTONE, Memtable
from .predicates import ValuePredicate
from .rows import Kind, key_dtype, latest_visible
from .sct import LAYOUT_ENCODED, SctReader

#: Codes per scan vector: 4096 x 4-byte lanes = 16 KiB, sized for L1.
CHUNK_CODES = 4096


@dataclass
class ReadView:
    read_seq: int
    memtables: Sequence[Memtable]
    levels: Sequence[Sequence[SctReader]]
    key_size: int = 16
    bulk_read_files: int = 2
    filter_workers: int = 1

    def files_newest_first(self):
        for level, files in enumerate(self.levels):
            for r in files:
                yield level, r


@dataclass
class FilterResult:
    rows: list[tuple[bytes, bytes]]
    stats: Counter = field(default_factory=Counter)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def scan_codes(codes: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Match bitmap for ``lo <= code < hi`` over 32-bit code lanes.

    Slides a fixed 4096-lane window over the column.  The test is one
    unsigned compare per lane, ``(code - lo) < (hi - lo)``, with wraparound
    rejecting codes below ``lo``; numpy runs it as a SIMD loop.
    """
    out = np.empty(len(codes), dtype=bool)
    if hi <= lo:
        out[:] = False
        return out
    lo32 = np.uint32(lo)
    span = np.uint32(hi - lo)
    for s in range(0, len(codes), CHUNK_CODES):
        chunk = codes[s:s + CHUNK_CODES]
        np.less(chunk - lo32, span, out=out[s:s + CHUNK_CODES])
    return out


def _level_files_for_key(files: Sequence[SctReader], key: bytes) -> list[SctReader]:
    maxes = [r.desc.max_key for r in files]
    i = bisect.bisect_left(maxes, key)
    if i < len(files) and files[i].desc.min_key <= key:
        return [files[i]]
    return []


def point_lookup(view: ReadView, key: bytes, stats: Counter | None = None) -> bytes | None:
    stats = stats if stats is not None else Counter()
    for mt in view.memtables:
        v = mt.get(key, view.read_seq)
        if v is TOMBSTONE:
            return None
        if v is not None:
            return v
    for level, files in enumerate(view.levels):
        cands = [r for r in files if r.desc.min_key <= key <= r.desc.max_key] if level == 0 \
            else _level_files_for_key(files, key)
        for r in cands:
            stats["files_probed"] += 1
            rec = r.point_probe(key, view.read_seq)
            if rec is None:
                continue
            if rec.kind == Kind.TOMBSTONE:
                return None
            return r.decode_record(rec)
    return None


def _values_for_rows(r: SctReader, rows: np.ndarray) -> list[bytes]:
    """Values of the given rows, reading each needed value-column block once."""
    if rows.size == 0:
        return []
    vb = r.desc.value_blocks
    starts = np.array([b.row_range[0] for b in vb])
    blk = np.searchsorted(starts, rows, side="right") - 1
    n_kb = len(r.desc.key_blocks)
    out: list = [None] * len(rows)
    for j in np.unique(blk).tolist():
        col = r.read_block(n_kb + j)
        sel = np.flatnonzero(blk == j)
        local = rows[sel] - vb[j].row_range[0]
        if r.desc.layout == LAYOUT_ENCODED:
            vals = r.desc.dictionary.decode_many(np.asarray(col)[local])
        else:
            vals = [col[i] for i in local.tolist()]
        for i, v in zip(sel.tolist(), vals):
            out[i] = v
    return out


@dataclass
class _Visible:
    """Latest visible version per key within one source."""

    keys: np.ndarray
    seqs: np.ndarray
    kinds: np.ndarray
    rows: np.ndarray | None = None
    values: list | None = None
    match: np.ndarray | None = None


def _memtable_visible(mt: Memtable, read_seq: int, key_size: int, lo=None, hi=None) -> _Visible:
    entries = list(mt.visible(read_seq, lo, hi))
    n = len(entries)
    dt = key_dtype(key_size)
    keys = np.array([e.user_key for e in entries], dtype=dt) if n else np.zeros(0, dt)
    return _Visible(keys, np.fromiter((e.seq for e in entries), np.uint64, n),
                    np.fromiter((e.kind for e in entries), np.uint8, n),
                    values=[e.value for e in entries])


def _resolve(sources: list[_Visible]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Winner (source index, position) per key across sources, keys ascending."""
    sizes = [len(s.keys) for s in sources]
    if not sum(sizes):
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
    keys = np.concatenate([s.keys for s in sources])
    seqs = np.concatenate([s.seqs for s in sources])
    src = np.concatenate([np.full(n, i, np.int64) for i, n in enumerate(sizes)])
    pos = np.concatenate([np.arange(n, dtype=np.int64) for n in sizes])
    order = np.lexsort((np.iinfo(np.uint64).max - seqs, keys))
    keys = keys[order]
    first = np.ones(len(keys), bool)
    first[1:] = keys[1:] != keys[:-1]
    win = order[first]
    return win, src[win], pos[win]


def range_lookup(view: ReadView, key_low: bytes, key_high: bytes,
                 stats: Counter | None = None) -> list[tuple[bytes, bytes]]:
    """Latest visible (key, value) pairs for keys in ``[key_low, key_high)``."""
    stats = stats if stats is not None else Counter()
    if key_low >= key_high:
        return []
    dt = key_dtype(view.key_size)
    lo_k, hi_k = np.array([key_low], dt)[0], np.array([key_high], dt)[0]
    sources: list[_Visible] = [_memtable_visible(mt, view.read_seq, view.key_size, key_low, key_high)
                               for mt in view.memtables]
    readers: list[SctReader | None] = [None] * len(sources)
    for level, files in enumerate(view.levels):
        hits = [r for r in files if r.desc.min_key < key_high and r.desc.max_key >= key_low]
        bulk = level > 0 and len(hits) >= view.bulk_read_files
        for r in hits:
            if bulk:
                keys, seqs, kinds = r.read_keys()
                base = 0
                stats["bulk_reads"] += 1
            else:
                first, last = r.key_block_span(key_low, key_high)
                keys, seqs, kinds = r.read_keys(first, last)
                base = r.desc.key_blocks[first].row_range[0] if last > first else 0
            a = int(np.searchsorted(keys, lo_k, side="left"))
            b = int(np.searchsorted(keys, hi_k, side="left"))
            idx = latest_visible(keys[a:b], seqs[a:b], view.read_seq) + a
            sources.append(_Visible(keys[idx], seqs[idx], kinds[idx], rows=idx + base))
            readers.append(r)
    _, src, pos = _resolve(sources)
    out_keys = []
    picks: dict[int, list[tuple[int, int]]] = {}
    for j, (s, p) in enumerate(zip(src.tolist(), pos.tolist())):
        if sources[s].kinds[p] == Kind.TOMBSTONE:
            continue
        out_keys.append((s, p))
        picks.setdefault(s, []).append((len(out_keys) - 1, p))
    values: list = [None] * len(out_keys)
    for s, items in picks.items():
        if readers[s] is None:
            for slot, p in items:
                values[slot] = sources[s].values[p]
        else:
            rows = sources[s].rows[[p for _, p in items]]
            for (slot, _), v in zip(items, _values_for_rows(readers[s], rows)):
                values[slot] = v
    ks = view.key_size
    return [(bytes(sources[s].keys[p]).ljust(ks, b"\x00"), v) for (s, p), v in zip(out_keys, values)]


def _scan_file(r: SctReader, p: ValuePredicate, read_seq: int) -> tuple[_Visible, Counter]:
    st = Counter()
    t0 = time.perf_counter()
    keys, seqs, kinds = r.read_keys()
    vis = latest_visible(keys, seqs, read_seq)
    st["rows_scanned"] += len(keys)
    if r.desc.layout == LAYOUT_ENCODED:
        lo, hi = r.desc.dictionary.code_range_for_predicate(p)
        if hi > lo:
            codes = r.read_codes()
            bitmap = scan_codes(codes, lo, hi)
            st["codes_tested"] += len(codes)
            st["value_bytes_touched"] += codes.nbytes
            match = bitmap[vis]
        else:
            st["files_code_skipped"] += 1
            match = np.zeros(len(vis), bool)
    else:
        values = r.read_values()
        st["value_bytes_touched"] += sum(len(v) for v in values)
        st["values_tested"] += len(values)
        match = np.fromiter((p.matches(values[i]) for i in vis.tolist()), bool, len(vis))
    match &= kinds[vis] == Kind.PUT
    st["scan_seconds"] += time.perf_counter() - t0
    return _Visible(keys[vis], seqs[vis], kinds[vis], rows=vis, match=match), st


def filter_values(view: ReadView, p: ValuePredicate, stats: Counter | None = None) -> FilterResult:
    """Latest visible (key, value) pairs whose value satisfies ``p``.

    Each source reports the newest visible version per key and whether it
    matches; a key is returned only when its newest version overall
    matches, so a newer non-matching version hides an older match.
    """
    stats = stats if stats is not None else Counter()
    sources: list[_Visible] = []
    readers: list[SctReader | None] = []
    for mt in view.memtables:
        v = _memtable_visible(mt, view.read_seq, view.key_size)
        v.match = np.fromiter((k == Kind.PUT and p.matches(val) for k, val in zip(v.kinds.tolist(), v.values)),
                              bool, len(v.keys))
        stats["memtable_rows_tested"] += len(v.keys)
        sources.append(v)
        readers.append(None)
    files = list(view.files_newest_first())
    if view.filter_workers > 1 and len(files) > 1:
        with ThreadPoolExecutor(view.filter_workers) as pool:
            scanned = list(pool.map(lambda lf: _scan_file(lf[1], p, view.read_seq), files))
    else:
        scanned = [_scan_file(r, p, view.read_seq) for _, r in files]
    for (level, r), (vis, st) in zip(files, scanned):
        stats.update(st)
        stats[f"level{level}_seconds"] += st["scan_seconds"]
        sources.append(vis)
        readers.append(r)

    # shadow checks only matter for keys that match somewhere
    cand = [s.keys[s.match] for s in sources if s.match.any()]
    if not cand:
        return FilterResult([], stats)
    cand_keys = np.unique(np.concatenate(cand))
    narrowed = []
    for s in sources:
        if len(s.keys) == 0:
            narrowed.append(np.zeros(0, np.int64))
            continue
        at = np.searchsorted(s.keys, cand_keys)
        ok = at < len(s.keys)
        ok[ok] = s.keys[at[ok]] == cand_keys[ok]
        narrowed.append(at[ok])
    reduced = [_Visible(s.keys[i], s.seqs[i], s.kinds[i]) for s, i in zip(sources, narrowed)]
    _, src, pos = _resolve(reduced)
    winners: dict[int, list[tuple[int, int]]] = {}
    order = []
    for s, p_ in zip(src.tolist(), pos.tolist()):
        orig = int(narrowed[s][p_])
        if sources[s].match[orig]:
            order.append((s, orig))
            winners.setdefault(s, []).append((len(order) - 1, orig))
    values: list = [None] * len(order)
    for s, items in winners.items():
        if readers[s] is None:
            for slot, i in items:
                values[slot] = sources[s].values[i]
        else:
            rows = sources[s].rows[[i for _, i in items]]
            for (slot, _), v in zip(items, _values_for_rows(readers[s], rows)):
                values[slot] = v
            stats["decodes"] += len(items)
    ks = view.key_size
    rows = [(bytes(sources[s].keys[i]).ljust(ks, b"\x00"), v) for (s, i), v in zip(order, values)]
    stats["results"] += len(rows)
    return FilterResult(rows, stats)

"""Leveling compaction on encoded columns, plus the decode-everything baseline.

The encoded path never turns a surviving row's code back into a string:
rows are merged and garbage-collected on keys alone, each output's
dictionary is rebuilt by merging only the source codes that survive, and
codes are rewritten through the resulting remap table.
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from . import dictionary as dictmod
from .dictionary import build_counted, comparison_bound, encode_many_counted, merge_dictionaries
from .errors import UnsortedInput
from .rows import Kind, RowBatch, gc_mask, is_sorted, key_group_starts, sort_order
from .sct import (BLOCK_SIZE, LAYOUT_ENCODED, LAYOUT_PLAIN, SctDescriptor, SctReader,
                  estimate_file_size, rows_per_key_block, write_sct)


class MergedTuple(NamedTuple):
    user_key: bytes
    seq: int
    kind: Kind
    old_code: int | None
    source: int


@dataclass
class CompactionJob:
    inputs_upper: list[SctReader]
    inputs_lower: list[SctReader]
    target_level: int
    file_budget: int
    bottom_level: bool = False
    oldest_snapshot_seq: int = 2**64 - 1

    @property
    def inputs(self) -> list[SctReader]:
        return list(self.inputs_upper) + list(self.inputs_lower)


@dataclass
class MergeRecord:
    """One dictionary merge: comparisons spent and the per-source NDVs involved."""

    comparisons: int
    source_ndv: list[int]
    used_ndv: list[int]

    @property
    def bound(self) -> float:
        return comparison_bound(self.source_ndv)


@dataclass
class CompactionResult:
    outputs: list[SctDescriptor]
    stats: Counter = field(default_factory=Counter)
    merges: list[MergeRecord] = field(default_factory=list)

    def __iter__(self) -> Iterator[SctDescriptor]:
        return iter(self.outputs)

    def __len__(self) -> int:
        return len(self.outputs)


PathAllocator = Callable[[], tuple[int, str]]


def iter_tuples(run: RowBatch) -> Iterator[MergedTuple]:
    ks = run.key_size
    codes = run.codes.tolist() if run.codes is not None else [None] * len(run)
    src = run.src.tolist() if run.src is not None else [0] * len(run)
    for k, s, kind, c, i in zip(run.keys.tolist(), run.seqs.tolist(), run.kinds.tolist(), codes, src):
        yield MergedTuple(k.ljust(ks, b"\x00"), s, Kind(kind), None if kind else c, i)


def merge_streams(inputs: Sequence[RowBatch], bottom_level: bool,
                  oldest_snapshot_seq: int) -> RowBatch:
    """Merge sorted inputs by (key asc, seq desc) and drop garbage versions.

    ``src`` of the result holds each row's input index.  Versions shadowed
    by a newer version visible to the oldest snapshot are dropped;
    tombstones are dropped only when ``bottom_level``.
    """
    for i, b in enumerate(inputs):
        if not is_sorted(b.keys, b.seqs):
            raise UnsortedInput(f"input {i} is not sorted")
    nonempty = [b for b in inputs if len(b)]
    if not nonempty:
        return RowBatch.empty(inputs[0].key_size if inputs else 16)
    keys = np.concatenate([b.keys for b in nonempty])
    seqs = np.concatenate([b.seqs for b in nonempty])
    kinds = np.concatenate([b.kinds for b in nonempty])
    src = np.concatenate([np.full(len(b), i, dtype=np.int32) for i, b in enumerate(inputs) if len(b)])
    codes = values = None
    if all(b.codes is not None for b in nonempty):
        codes = np.concatenate([b.codes for b in nonempty])
    if all(b.values is not None for b in nonempty):
        values = np.concatenate([b.values for b in nonempty])
    order = sort_order(keys, seqs)
    merged = RowBatch(keys[order], seqs[order], kinds[order],
                      None if codes is None else codes[order],
                      None if values is None else values[order], src[order])
    keep = gc_mask(merged.keys, merged.seqs, merged.kinds, oldest_snapshot_seq, bottom_level)
    return merged if keep.all() else merged.take(keep)


def divide(run: RowBatch, budget: int, *, value_ids: np.ndarray, value_lens: np.ndarray,
           layout: int = LAYOUT_ENCODED, bits_per_key: int = 10) -> list[tuple[int, int]]:
    """Split a merged run into consecutive ``[start, end)`` parts of at most ``budget`` bytes.

    ``value_ids`` identifies each row's distinct value (-1 for tombstones)
    and ``value_lens`` its byte length; together they size each part's
    dictionary (encoded layout) or raw value column (plain layout).  A key's
    versions never straddle two parts.
    """
    n = len(run)
    if n == 0:
        return []
    key_size = run.key_size
    starts_of_key = key_group_starts(run.keys)
    group_start = np.maximum.accumulate(np.where(starts_of_key, np.arange(n), 0))
    max_rows = (budget // BLOCK_SIZE + 1) * rows_per_key_block(key_size)
    parts = []
    s = 0
    while s < n:
        e_cap = min(n, s + max_rows)
        ids = value_ids[s:e_cap]
        lens = np.where(ids >= 0, value_lens[s:e_cap], 0)
        first = np.zeros(len(ids), dtype=bool)
        live = np.flatnonzero(ids >= 0)
        if live.size:
            _, fi = np.unique(ids[live], return_index=True)
            first[live[fi]] = True
        ndv = np.cumsum(first)
        dict_bytes = np.cumsum(np.where(first, lens, 0))
        plain_bytes = np.cumsum(lens)
        sizes = estimate_file_size(np.arange(1, len(ids) + 1), key_size=key_size, layout=layout,
                                   ndv=ndv, dict_value_bytes=dict_bytes, plain_value_bytes=plain_bytes,
                                   max_value_len=int(value_lens.max(initial=1)),
                                   bits_per_key=bits_per_key)
        fit = int(np.searchsorted(sizes, budget, side="right"))
        e = s + max(fit, 1)
        if e < n and not starts_of_key[e]:
            back = int(group_start[e])
            if back > s:
                e = back
            else:
                nxt = np.flatnonzero(starts_of_key[e:])
                e = e + int(nxt[0]) if nxt.size else n
        parts.append((s, e))
        s = e
    return parts


def _decode_counter() -> int:
    return dictmod.counters["decodes"]


def _read_inputs(job: CompactionJob, stats: Counter) -> list[RowBatch]:
    batches = []
    for r in job.inputs:
        before = r.stats["bytes_read"]
        batches.append(r.read_all())
        stats["compaction_bytes_read"] += r.stats["bytes_read"] - before
    return batches


def compact(job: CompactionJob, allocate: PathAllocator, *, bits_per_key: int = 10,
            bloom_hashes: int = 7, fsync: bool = True) -> CompactionResult:
    """Merge the job's encoded inputs into new SCTs without decoding values."""
    t0 = time.perf_counter()
    result = CompactionResult([])
    stats = result.stats
    decodes0 = _decode_counter()
    readers = job.inputs
    batches = _read_inputs(job, stats)
    run = merge_streams(batches, job.bottom_level, job.oldest_snapshot_seq)
    dicts = [r.desc.dictionary for r in readers]
    put = run.kinds == Kind.PUT
    # distinct (source, code) pairs stand in for distinct values when sizing
    width = max((d.m for d in dicts), default=1) + 1
    value_ids = np.where(put, run.src.astype(np.int64) * width + run.codes, -1)
    lens_by_src = [d.value_lengths() for d in dicts]
    value_lens = np.zeros(len(run), dtype=np.int64)
    for i, lens in enumerate(lens_by_src):
        m = put & (run.src == i)
        value_lens[m] = lens[run.codes[m]]
    for s, e in divide(run, job.file_budget, value_ids=value_ids, value_lens=value_lens,
                       layout=LAYOUT_ENCODED, bits_per_key=bits_per_key):
        part = run.slice(s, e)
        ppart = part.kinds == Kind.PUT
        srcs = np.unique(part.src[ppart])
        used = {int(i): part.codes[ppart & (part.src == i)] for i in srcs}
        merged = merge_dictionaries([(int(i), dicts[i]) for i in srcs], used)
        result.merges.append(MergeRecord(merged.comparisons, [dicts[i].m for i in srcs],
                                         [len(np.unique(used[int(i)])) for i in srcs]))
        stats["string_comparisons"] += merged.comparisons
        new_codes = np.zeros(len(part), dtype=np.uint32)
        for i in srcs:
            m = ppart & (part.src == i)
            new_codes[m] = merged.evtable.remap(int(i), part.codes[m])
        sct_id, path = allocate()
        desc = write_sct(RowBatch(part.keys, part.seqs, part.kinds, codes=new_codes), path,
                         sct_id=sct_id, dictionary=merged.dictionary, layout=LAYOUT_ENCODED,
                         bits_per_key=bits_per_key, bloom_hashes=bloom_hashes, fsync=fsync)
        desc.level = job.target_level
        result.outputs.append(desc)
        stats["compaction_bytes_written"] += desc.file_size_bytes
        stats["compaction_rows_written"] += len(part)
    stats["compaction_rows_read"] += sum(len(b) for b in batches)
    stats["decodes"] += _decode_counter() - decodes0
    stats["compaction_seconds"] += time.perf_counter() - t0
    stats["compactions"] += 1
    return result


def _decoded_batches(job: CompactionJob, batches: list[RowBatch]) -> list[RowBatch]:
    out = []
    for r, b in zip(job.inputs, batches):
        if b.values is None:
            values = np.empty(len(b), dtype=object)
            values[:] = b""
            put = np.flatnonzero(b.kinds == Kind.PUT)
            values[put] = r.desc.dictionary.decode_many(b.codes[put])
            b = RowBatch(b.keys, b.seqs, b.kinds, values=values)
        out.append(b)
    return out


def compact_naive(job: CompactionJob, allocate: PathAllocator, *, layout: int = LAYOUT_ENCODED,
                  bits_per_key: int = 10, bloom_hashes: int = 7, fsync: bool = True) -> CompactionResult:
    """Baseline: decode every value, merge on strings, rebuild and re-encode.

    With ``layout=LAYOUT_PLAIN`` the outputs keep raw values (the
    uncompressed engine); otherwise dictionaries are rebuilt from the
    decoded strings and every row is re-encoded by binary search.
    """
    t0 = time.perf_counter()
    result = CompactionResult([])
    stats = result.stats
    decodes0 = _decode_counter()
    batches = _decoded_batches(job, _read_inputs(job, stats))
    run = merge_streams(batches, job.bottom_level, job.oldest_snapshot_seq)
    put = run.kinds == Kind.PUT
    ids: dict[bytes, int] = {}
    value_ids = np.fromiter((ids.setdefault(v, len(ids)) if p else -1
                             for v, p in zip(run.values.tolist(), put.tolist())),
                            dtype=np.int64, count=len(run))
    value_lens = np.fromiter((len(v) for v in run.values.tolist()), dtype=np.int64, count=len(run))
    for s, e in divide(run, job.file_budget, value_ids=value_ids, value_lens=value_lens,
                       layout=layout, bits_per_key=bits_per_key):
        part = run.slice(s, e)
        sct_id, path = allocate()
        if layout == LAYOUT_ENCODED:
            pidx = np.flatnonzero(part.kinds == Kind.PUT)
            strings = part.values[pidx].tolist()
            d, n_sort = build_counted(strings)
            codes = np.zeros(len(part), dtype=np.uint32)
            codes[pidx], n_enc = encode_many_counted(d, strings)
            stats["string_comparisons"] += n_sort + n_enc
            desc = write_sct(RowBatch(part.keys, part.seqs, part.kinds, codes=codes), path,
                             sct_id=sct_id, dictionary=d, layout=layout, bits_per_key=bits_per_key,
                             bloom_hashes=bloom_hashes, fsync=fsync)
        else:
            desc = write_sct(part, path, sct_id=sct_id, layout=LAYOUT_PLAIN,
                             bits_per_key=bits_per_key, bloom_hashes=bloom_hashes, fsync=fsync)
        desc.level = job.target_level
        result.outputs.append(desc)
        stats["compaction_bytes_written"] += desc.file_size_bytes
        stats["compaction_rows_written"] += len(part)
    stats["compaction_rows_read"] += sum(len(b) for b in batches)
    stats["decodes"] += _decode_counter() - decodes0
    stats["compaction_seconds"] += time.perf_counter() - t0
    stats["compactions"] += 1
    return result

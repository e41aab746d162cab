"""Order-preserving dictionaries and the encoded-domain dictionary merge.

A dictionary maps its distinct values, sorted bytewise, to dense codes
``0..m-1``; code order equals value order, so predicates on values become
code intervals.  :func:`merge_dictionaries` rebuilds a dictionary for a
compaction output from only the source codes that survive, producing a
per-source remap table so rows are rewritten without touching strings.
"""
from __future__ import annotations

import bisect
import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cmp_to_key
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CodeOutOfRange, EmptyDomain, InvalidCode, NotInDomain
from .predicates import Equality, Prefix, Range, ValuePredicate, prefix_successor

#: Process-wide instrumentation; ``decodes`` counts code -> string lookups.
counters: Counter = Counter()

UNMAPPED = np.uint32(0xFFFFFFFF)


def _cmp3(a: bytes, b: bytes) -> int:
    return (a > b) - (a < b)


class OrderPreservingDictionary:
    __slots__ = ("values", "_lengths", "_index")

    def __init__(self, values: Sequence[bytes], *, validate: bool = True):
        values = list(values)
        if validate:
            for a, b in zip(values, values[1:]):
                if not a < b:
                    raise ValueError("dictionary values must be strictly increasing")
        self.values = values
        self._lengths: np.ndarray | None = None
        self._index: dict[bytes, int] | None = None

    @classmethod
    def build(cls, values: Iterable[bytes], *, allow_empty: bool = True) -> OrderPreservingDictionary:
        distinct = sorted(set(values))
        if not distinct and not allow_empty:
            raise EmptyDomain("no values to build a dictionary from")
        return cls(distinct, validate=False)

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def code_width_bits(self) -> int:
        return max(1, math.ceil(math.log2(max(self.m, 2))))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, OrderPreservingDictionary) and self.values == other.values

    def __repr__(self) -> str:
        return f"OrderPreservingDictionary(m={self.m})"

    def lower_bound(self, v: bytes) -> int:
        return bisect.bisect_left(self.values, v)

    def encode(self, v: bytes) -> int:
        i = bisect.bisect_left(self.values, v)
        if i == len(self.values) or self.values[i] != v:
            raise NotInDomain(v)
        return i

    def encode_many(self, values: Iterable[bytes]) -> np.ndarray:
        """Bulk encode via a hash index; every value must be in the domain."""
        if self._index is None:
            self._index = {v: i for i, v in enumerate(self.values)}
        idx = self._index
        try:
            return np.fromiter((idx[v] for v in values), dtype=np.uint32)
        except KeyError as exc:
            raise NotInDomain(exc.args[0]) from None

    def decode(self, code: int) -> bytes:
        if not 0 <= code < len(self.values):
            raise CodeOutOfRange(code)
        counters["decodes"] += 1
        return self.values[code]

    def decode_many(self, codes: Iterable[int]) -> list[bytes]:
        vals = self.values
        out = [vals[c] for c in np.asarray(codes, dtype=np.int64).tolist()]
        counters["decodes"] += len(out)
        return out

    def value_lengths(self) -> np.ndarray:
        """Byte length per code, available without decoding values."""
        if self._lengths is None:
            self._lengths = np.fromiter((len(v) for v in self.values), dtype=np.int64, count=self.m)
        return self._lengths

    def code_range_for_predicate(self, p: ValuePredicate) -> tuple[int, int]:
        """Half-open code interval ``[lo, hi)`` whose values satisfy ``p``."""
        if isinstance(p, Equality):
            lo = self.lower_bound(p.value)
            if lo < self.m and self.values[lo] == p.value:
                return lo, lo + 1
            return lo, lo
        if isinstance(p, Prefix):
            lo = self.lower_bound(p.prefix)
            succ = prefix_successor(p.prefix)
            hi = self.m if succ is None else self.lower_bound(succ)
            return lo, max(lo, hi)
        if isinstance(p, Range):
            lo = self.lower_bound(p.low)
            return lo, max(lo, self.lower_bound(p.high))
        raise TypeError(f"unsupported predicate {p!r}")


@dataclass
class EVTable:
    """Remap table ``(old_code, source_id) -> new_code``.

    Stored per source as a dense array indexed by old code so a whole
    column is remapped with one gather.
    """

    tables: dict[int, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> int:
        code, sid = key
        v = self.tables[sid][code]
        if v == UNMAPPED:
            raise KeyError(key)
        return int(v)

    def __len__(self) -> int:
        return sum(int((t != UNMAPPED).sum()) for t in self.tables.values())

    def items(self):
        for sid, t in self.tables.items():
            for code in np.flatnonzero(t != UNMAPPED).tolist():
                yield (code, sid), int(t[code])

    def remap(self, sid: int, codes: np.ndarray) -> np.ndarray:
        out = self.tables[sid][codes]
        if out.size and bool((out == UNMAPPED).any()):
            raise InvalidCode(f"code without mapping in source {sid}")
        return out


# (value, [(old_code, source_id), ...]) in value order
ReverseIndex = list


@dataclass
class MergeResult:
    dictionary: OrderPreservingDictionary
    evtable: EVTable
    reverse_index: ReverseIndex
    comparisons: int

    def __iter__(self):
        # allows ``merged, table = merge_dictionaries(...)``
        return iter((self.dictionary, self.evtable))


def _merge_runs(a: list, b: list, tally: list[int]) -> list:
    out = []
    i = j = 0
    n_cmp = 0
    while i < len(a) and j < len(b):
        c = _cmp3(a[i][0], b[j][0])
        n_cmp += 1
        if c < 0:
            out.append(a[i])
            i += 1
        elif c > 0:
            out.append(b[j])
            j += 1
        else:
            out.append((a[i][0], a[i][1] + b[j][1]))
            i += 1
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    tally[0] += n_cmp
    return out


def build_reverse_index(
    sources: Sequence[tuple[int, OrderPreservingDictionary]],
    used_codes: Mapping[int, np.ndarray],
) -> tuple[ReverseIndex, int]:
    """Map each surviving distinct value to its ``(old_code, source)`` pairs.

    Each source's used codes are already in value order, so the sources are
    sorted runs; they are merged smallest-first, and duplicate values across
    runs collapse on their first equal comparison.  Returns the index and
    the number of string comparisons spent.
    """
    runs = []
    for sid, d in sources:
        codes = np.unique(np.asarray(used_codes.get(sid, ()), dtype=np.int64))
        if codes.size == 0:
            continue
        if codes[0] < 0 or codes[-1] >= d.m:
            raise InvalidCode(f"source {sid} has code outside [0, {d.m})")
        vals = d.values
        runs.append([(vals[c], [(c, sid)]) for c in codes.tolist()])
    tally = [0]
    heap = [(len(r), i, r) for i, r in enumerate(runs)]
    heapq.heapify(heap)
    serial = len(runs)
    while len(heap) > 1:
        _, _, a = heapq.heappop(heap)
        _, _, b = heapq.heappop(heap)
        merged = _merge_runs(a, b, tally)
        heapq.heappush(heap, (len(merged), serial, merged))
        serial += 1
    return (heap[0][2] if heap else []), tally[0]


def merge_dictionaries(
    sources: Sequence[tuple[int, OrderPreservingDictionary]],
    used_codes: Mapping[int, np.ndarray] | None = None,
) -> MergeResult:
    """Merge source dictionaries restricted to ``used_codes``.

    ``used_codes`` maps source id to the codes that appear in the merged
    subsequence; when omitted every code of every source is used.
    """
    if used_codes is None:
        used_codes = {sid: np.arange(d.m) for sid, d in sources}
    rindex, n_cmp = build_reverse_index(sources, used_codes)
    merged = OrderPreservingDictionary([v for v, _ in rindex], validate=False)
    tables = {sid: np.full(d.m, UNMAPPED, dtype=np.uint32) for sid, d in sources}
    for new_code, (_, pairs) in enumerate(rindex):
        for old_code, sid in pairs:
            tables[sid][old_code] = new_code
    return MergeResult(merged, EVTable(tables), rindex, n_cmp)


def comparison_bound(source_ndvs: Iterable[int], c: float = 4.0) -> float:
    """``c * sum(D_i * log2(D_i + 1))``, the budget for a dictionary merge."""
    return c * sum(d * math.log2(d + 1) for d in source_ndvs)


def build_counted(values: Iterable[bytes]) -> tuple[OrderPreservingDictionary, int]:
    """Build from raw strings, counting string comparisons of the sort."""
    distinct = list(set(values))
    tally = [0]

    def cmp(a: bytes, b: bytes) -> int:
        tally[0] += 1
        return _cmp3(a, b)

    distinct.sort(key=cmp_to_key(cmp))
    return OrderPreservingDictionary(distinct, validate=False), tally[0]


def encode_many_counted(d: OrderPreservingDictionary, values: Sequence[bytes]) -> tuple[np.ndarray, int]:
    """Encode by binary search per value, returning codes and comparisons.

    The comparison count is exact for :func:`bisect.bisect_left`: its probe
    path is fully determined by the returned index, so the loop is replayed
    on integers for all values at once.  One equality check per value is
    added on top.
    """
    vals = d.values
    idx = np.fromiter((bisect.bisect_left(vals, v) for v in values), dtype=np.int64, count=len(values))
    for v, i in zip(values, idx.tolist()):
        if i == len(vals) or vals[i] != v:
            raise NotInDomain(v)
    lo = np.zeros_like(idx)
    hi = np.full_like(idx, len(vals))
    steps = 0
    active = lo < hi
    while active.any():
        steps += int(active.sum())
        mid = (lo + hi) // 2
        go_right = active & (mid < idx)
        go_left = active & ~(mid < idx)
        lo = np.where(go_right, mid + 1, lo)
        hi = np.where(go_left, mid, hi)
        active = lo < hi
    return idx.astype(np.uint32), steps + len(values)

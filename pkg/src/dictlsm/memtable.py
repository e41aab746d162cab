"""Ordered in-memory write buffer with version lifetime intervals."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from sortedcontainers import SortedDict

from .errors import AlreadyFrozen, KeySizeMismatch, MemtableFrozen
from .rows import Kind, RowBatch, key_dtype


class _Tombstone:
    __slots__ = ()

    def __repr__(self) -> str:
        return "TOMBSTONE"

    def __bool__(self) -> bool:
        return False


#: Returned by reads that hit a delete marker, so callers stop descending.
TOMBSTONE = _Tombstone()


@dataclass(slots=True)
class InternalEntry:
    user_key: bytes
    seq: int
    kind: Kind
    value: bytes = b""


@dataclass(slots=True)
class VersionedSlot:
    entry: InternalEntry
    created: int
    deleted: int | None = None

    def covers(self, read_seq: int) -> bool:
        return self.created <= read_seq and (self.deleted is None or read_seq < self.deleted)


class Memtable:
    """Per-key version lists (newest first) in a sorted map.

    One writer, many readers: mutations and reads take a short lock since
    the sorted map is not safe to iterate while it is modified.
    """

    def __init__(self, key_size: int = 16):
        self.key_size = key_size
        self._map: SortedDict = SortedDict()
        self._lock = threading.Lock()
        self.byte_size = 0
        self.count = 0
        self.frozen = False
        self.max_seq = 0

    # M in O(log M)
    def __len__(self) -> int:
        return self.count

    def _insert(self, key: bytes, seq: int, kind: Kind, value: bytes) -> None:
        if self.frozen:
            raise MemtableFrozen("memtable is frozen")
        if len(key) != self.key_size:
            raise KeySizeMismatch(f"key of {len(key)} bytes, expected {self.key_size}")
        if seq <= self.max_seq:
            raise ValueError(f"sequence {seq} not above {self.max_seq}")
        slot = VersionedSlot(InternalEntry(key, seq, kind, value), seq)
        with self._lock:
            versions = self._map.get(key)
            if versions is None:
                self._map[key] = [slot]
            else:
                head = versions[0]
                if head.deleted is None:
                    head.deleted = seq
                versions.insert(0, slot)
            self.byte_size += len(key) + len(value)
            self.count += 1
            self.max_seq = seq

    def put(self, key: bytes, value: bytes, seq: int) -> None:
        self._insert(key, seq, Kind.PUT, value)

    def delete(self, key: bytes, seq: int) -> None:
        self._insert(key, seq, Kind.TOMBSTONE, b"")

    def get(self, key: bytes, read_seq: int):
        """Value, :data:`TOMBSTONE`, or None when no version covers ``read_seq``."""
        with self._lock:
            versions = self._map.get(key)
            if versions is None:
                return None
            for slot in versions:
                if slot.covers(read_seq):
                    e = slot.entry
                    return TOMBSTONE if e.kind == Kind.TOMBSTONE else e.value
                if slot.created <= read_seq:
                    break
        return None

    def visible(self, read_seq: int, lo: bytes | None = None, hi: bytes | None = None) -> Iterator[InternalEntry]:
        """Newest entry per key with seq <= read_seq, keys in [lo, hi)."""
        with self._lock:
            keys = list(self._map.irange(lo, hi, inclusive=(True, False)))
            groups = [self._map[k] for k in keys]
        for versions in groups:
            for slot in versions:
                if slot.created <= read_seq:
                    yield slot.entry
                    break

    def slots(self) -> Iterator[VersionedSlot]:
        """All slots, keys ascending and seq descending within a key."""
        with self._lock:
            groups = list(self._map.values())
        for versions in groups:
            yield from versions

    def __iter__(self) -> Iterator[InternalEntry]:
        for slot in self.slots():
            yield slot.entry

    def freeze(self) -> FrozenMemtable:
        if self.frozen:
            raise AlreadyFrozen("memtable already frozen")
        self.frozen = True
        return FrozenMemtable(self)


class FrozenMemtable:
    """Read-only handle over a frozen memtable, handed to flush."""

    def __init__(self, table: Memtable):
        self.table = table

    def __len__(self) -> int:
        return len(self.table)

    def __iter__(self) -> Iterator[InternalEntry]:
        return iter(self.table)

    def get(self, key: bytes, read_seq: int):
        return self.table.get(key, read_seq)

    @property
    def max_seq(self) -> int:
        return self.table.max_seq

    def to_batch(self) -> RowBatch:
        entries = list(self.table)
        n = len(entries)
        keys = np.array([e.user_key for e in entries], dtype=key_dtype(self.table.key_size)) if n else \
            np.zeros(0, key_dtype(self.table.key_size))
        seqs = np.fromiter((e.seq for e in entries), dtype=np.uint64, count=n)
        kinds = np.fromiter((e.kind for e in entries), dtype=np.uint8, count=n)
        values = np.empty(n, dtype=object)
        values[:] = [e.value for e in entries]
        return RowBatch(keys, seqs, kinds, values=values)

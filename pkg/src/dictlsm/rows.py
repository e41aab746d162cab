"""Columnar row batches and the version garbage-collection rule."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import UnsortedInput


class Kind(IntEnum):
    PUT = 0
    TOMBSTONE = 1


def key_dtype(key_size: int) -> np.dtype:
    return np.dtype(f"S{key_size}")


def key_bytes(k, key_size: int) -> bytes:
    # numpy strips trailing NULs from S-dtype scalars
    return bytes(k).ljust(key_size, b"\x00")


@dataclass
class RowBatch:
    """Rows sorted by (user_key asc, seq desc).

    Exactly one of ``codes`` (encoded layout) or ``values`` (object array
    of bytes) is usually set; ``src`` tags each row with an input index.
    """

    keys: np.ndarray
    seqs: np.ndarray
    kinds: np.ndarray
    codes: np.ndarray | None = None
    values: np.ndarray | None = None
    src: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def key_size(self) -> int:
        return self.keys.dtype.itemsize

    def take(self, idx) -> RowBatch:
        pick = lambda a: None if a is None else a[idx]
        return RowBatch(self.keys[idx], self.seqs[idx], self.kinds[idx],
                        pick(self.codes), pick(self.values), pick(self.src))

    def slice(self, start: int, stop: int) -> RowBatch:
        return self.take(slice(start, stop))

    def check_sorted(self) -> None:
        if not is_sorted(self.keys, self.seqs):
            raise UnsortedInput("rows must be sorted by (key asc, seq desc)")

    @classmethod
    def empty(cls, key_size: int) -> RowBatch:
        return cls(np.zeros(0, key_dtype(key_size)), np.zeros(0, np.uint64), np.zeros(0, np.uint8))


def is_sorted(keys: np.ndarray, seqs: np.ndarray) -> bool:
    if len(keys) < 2:
        return True
    k0, k1 = keys[:-1], keys[1:]
    lt = k0 < k1
    eq = k0 == k1
    return bool(np.all(lt | (eq & (seqs[:-1] > seqs[1:]))))


def sort_order(keys: np.ndarray, seqs: np.ndarray) -> np.ndarray:
    """Permutation ordering rows by key ascending, then seq descending."""
    return np.lexsort((np.iinfo(np.uint64).max - seqs, keys))


def key_group_starts(keys: np.ndarray) -> np.ndarray:
    """Boolean mask marking the first row of each run of equal keys."""
    first = np.ones(len(keys), dtype=bool)
    if len(keys) > 1:
        first[1:] = keys[1:] != keys[:-1]
    return first


def gc_mask(keys: np.ndarray, seqs: np.ndarray, kinds: np.ndarray,
            oldest_snapshot_seq: int, drop_tombstones: bool) -> np.ndarray:
    """Rows that survive garbage collection, for rows in merge order.

    A version is dropped when a newer version of the same key is visible to
    the oldest live snapshot.  Within a key the nearest newer row has the
    smallest newer seq, so it alone decides.  With ``drop_tombstones`` (no
    older data can exist below), a tombstone visible to every snapshot is
    dropped too; everything older than it is already gone by the first rule.
    """
    keep = np.ones(len(keys), dtype=bool)
    if len(keys) == 0:
        return keep
    oldest = np.uint64(oldest_snapshot_seq)
    first = key_group_starts(keys)
    shadowed = np.zeros(len(keys), dtype=bool)
    shadowed[1:] = ~first[1:] & (seqs[:-1] <= oldest)
    keep &= ~shadowed
    if drop_tombstones:
        keep &= ~((kinds == Kind.TOMBSTONE) & (seqs <= oldest))
    return keep


def latest_visible(keys: np.ndarray, seqs: np.ndarray, read_seq: int) -> np.ndarray:
    """Indices of the newest row with seq <= read_seq for every key."""
    vis = np.flatnonzero(seqs <= np.uint64(read_seq))
    if vis.size == 0:
        return vis
    k = keys[vis]
    first = key_group_starts(k)
    return vis[first]

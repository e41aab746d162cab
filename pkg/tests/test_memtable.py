import random

import pytest

from dictlsm.errors import AlreadyFrozen, KeySizeMismatch, MemtableFrozen
from dictlsm.memtable import TOMBSTONE, Memtable
from dictlsm.rows import Kind
from oracles import MvccOracle


def k(s: str) -> bytes:
    return s.encode().ljust(16, b"_")


def test_read_your_write_and_lifetimes():
    m = Memtable(16)
    m.put(k("k1"), b"a", 1)
    m.put(k("k1"), b"b", 2)
    assert m.get(k("k1"), 1) == b"a"
    assert m.get(k("k1"), 2) == b"b"
    slots = list(m.slots())
    assert [(s.created, s.deleted) for s in slots] == [(2, None), (1, 2)]


def test_delete_semantics():
    m = Memtable(16)
    m.put(k("k"), b"v", 1)
    m.delete(k("k"), 2)
    assert m.get(k("k"), 3) is TOMBSTONE
    m.delete(k("absent"), 3)
    assert m.get(k("absent"), 3) is TOMBSTONE
    m.put(k("k"), b"w", 4)
    assert m.get(k("k"), 4) == b"w"


def test_absent_and_future_slots():
    m = Memtable(16)
    assert m.get(k("k"), 5) is None
    m.put(k("k"), b"v", 3)
    assert m.get(k("k"), 2) is None


def test_rejections():
    m = Memtable(16)
    with pytest.raises(KeySizeMismatch):
        m.put(b"short", b"v", 1)
    m.put(k("a"), b"v", 2)
    with pytest.raises(ValueError):
        m.put(k("b"), b"v", 2)
    m.freeze()
    with pytest.raises(AlreadyFrozen):
        m.freeze()
    with pytest.raises(MemtableFrozen):
        m.put(k("c"), b"v", 3)
    with pytest.raises(MemtableFrozen):
        m.delete(k("c"), 3)


def test_random_ops_match_replay_oracle():
    rng = random.Random(11)
    m, ref = Memtable(16), MvccOracle()
    keys = [rng.randbytes(16) for _ in range(60)]
    size = 0
    for seq in range(1, 3001):
        key = rng.choice(keys)
        if rng.random() < 0.2:
            m.delete(key, seq)
            ref.delete(key, seq)
            size += 16
        else:
            v = rng.randbytes(rng.randint(0, 10))
            m.put(key, v, seq)
            ref.put(key, v, seq)
            size += 16 + len(v)
    assert m.byte_size == size
    for _ in range(3000):
        key, rs = rng.choice(keys), rng.randint(0, 3001)
        got = m.get(key, rs)
        want = ref.get(key, rs)
        if got is TOMBSTONE:
            got = None
        assert got == want
    # iteration: keys ascending, seq descending within a key
    entries = list(m)
    assert [(e.user_key, -e.seq) for e in entries] == sorted((e.user_key, -e.seq) for e in entries)
    live = {}
    for s in m.slots():
        if s.deleted is None:
            assert s.entry.user_key not in live
            live[s.entry.user_key] = s
        else:
            assert s.deleted > s.created


def test_frozen_iterates_all_entries_in_order():
    rng = random.Random(3)
    m = Memtable(16)
    keys = [rng.randbytes(16) for _ in range(1000)]
    for i, key in enumerate(keys, 1):
        m.put(key, b"v", i)
    frozen = m.freeze()
    got = [e.user_key for e in frozen]
    assert got == sorted(keys) and len(frozen) == 1000
    batch = frozen.to_batch()
    assert len(batch) == 1000 and set(batch.kinds.tolist()) == {int(Kind.PUT)}

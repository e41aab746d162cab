import random

import numpy as np
import pytest

from dictlsm import Engine
from dictlsm.predicates import Equality, Prefix, Range
from dictlsm.query import CHUNK_CODES, scan_codes
from oracles import MvccOracle, drive, random_predicate, random_value_pool, small_config

LO, HI = b"\x00" * 16, b"\xff" * 16


def k(i: int) -> bytes:
    return i.to_bytes(16, "big")


@pytest.mark.parametrize("n", [0, 1, 4095, 4096, 4097, 3 * CHUNK_CODES + 17])
def test_chunked_scan_equals_scalar(n):
    rng = np.random.default_rng(n)
    codes = rng.integers(0, 50, size=n).astype(np.uint32)
    for lo, hi in [(0, 0), (3, 9), (0, 50), (49, 50), (10, 5)]:
        got = scan_codes(codes, lo, hi)
        assert got.tolist() == [lo <= int(c) < hi for c in codes]


def test_memtable_hit_needs_no_file_io(tmp_path):
    with Engine.open(str(tmp_path), small_config()) as e:
        for i in range(500):
            e.put(k(i), b"v%d" % i)
        e.put(k(10_000), b"fresh")
        before = e.stats().get("bytes_read", 0)
        assert e.get(k(10_000)) == b"fresh"
        assert e.stats().get("bytes_read", 0) == before


def test_tombstone_in_level0_shadows_deeper_put(tmp_path):
    with Engine.open(str(tmp_path), small_config(auto_compact=False)) as e:
        e.put(k(1), b"old")
        e.flush()
        e.compact_level(0)
        e.compact_level(1)
        assert e.levels()[2]
        e.delete(k(1))
        e.flush()
        assert e.levels()[0]
        assert e.get(k(1)) is None
        assert e.scan(LO, HI) == []
        assert len(e.filter(Equality(b"old"))) == 0


def test_newer_nonmatching_version_hides_older_match(tmp_path):
    with Engine.open(str(tmp_path), small_config(auto_compact=False)) as e:
        e.put(k(1), b"apple")
        e.put(k(2), b"apple")
        e.flush()
        e.compact_level(0)
        e.put(k(1), b"banana")
        e.flush()
        res = e.filter(Equality(b"apple"))
        assert res.rows == [(k(2), b"apple")]
        assert e.filter(Prefix(b"ban")).rows == [(k(1), b"banana")]


def test_predicate_matching_nothing_decodes_nothing(tmp_path):
    with Engine.open(str(tmp_path), small_config()) as e:
        for i in range(2000):
            e.put(k(i), b"val%03d" % (i % 50))
        e.flush()
        res = e.filter(Prefix(b"zzz"))
        assert res.rows == [] and res.stats["decodes"] == 0
        assert res.stats["files_code_skipped"] > 0


def test_empty_range_and_full_scan_agree_with_filter(tmp_path):
    rng = random.Random(2)
    pool = random_value_pool(rng, 30)
    with Engine.open(str(tmp_path), small_config()) as e:
        ref = MvccOracle()
        drive(e, ref, rng, 3000, 800, pool)
        assert e.scan(k(5), k(5)) == []
        full = e.scan(LO, HI)
        assert full == e.filter(Prefix(b"")).rows
        assert full == ref.scan(LO, HI, e.last_seq)


def test_filter_touches_four_bytes_per_row(tmp_path):
    with Engine.open(str(tmp_path), small_config()) as e:
        for i in range(3000):
            e.put(k(i), b"x" * 60 + b"%04d" % (i % 30))
        e.compact_all()
        res = e.filter(Range(b"x", b"y"))
        assert len(res) == 3000
        assert res.stats["value_bytes_touched"] == 4 * res.stats["codes_tested"]


def test_random_states_match_oracle(tmp_path):
    rng = random.Random(7)
    pool = random_value_pool(rng, 40)
    with Engine.open(str(tmp_path), small_config()) as e:
        ref = MvccOracle()
        drive(e, ref, rng, 8000, 5000, pool)
        assert sum(1 for lvl in e.levels() if lvl) >= 3
        for _ in range(30):
            p = random_predicate(rng, pool)
            assert e.filter(p).rows == ref.filter(p, e.last_seq)
        for _ in range(30):
            a, b = sorted(rng.randrange(5000) for _ in range(2))
            assert e.scan(k(a), k(b)) == ref.scan(k(a), k(b), e.last_seq)


def test_parallel_filter_workers_agree(tmp_path):
    rng = random.Random(8)
    pool = random_value_pool(rng, 40)
    with Engine.open(str(tmp_path), small_config(filter_workers=4)) as e:
        ref = MvccOracle()
        drive(e, ref, rng, 3000, 1000, pool)
        for _ in range(10):
            p = random_predicate(rng, pool)
            assert e.filter(p).rows == ref.filter(p, e.last_seq)

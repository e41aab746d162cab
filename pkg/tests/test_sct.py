import os
import random

import numpy as np
import pytest

from dictlsm.dictionary import OrderPreservingDictionary
from dictlsm.errors import ChecksumMismatch, CodeOutOfRange, CorruptFile, EmptyFile, UnsortedInput
from dictlsm.rows import Kind, RowBatch, key_dtype
from dictlsm.sct import (BLOCK_SIZE, LAYOUT_ENCODED, LAYOUT_PLAIN, SctReader, column_width,
                         estimate_file_size, read_sct, tombstone_code, write_sct)
from oracles import decode_file, make_batch, random_key, random_value, write_rows


def _rows(rng, n, ndv, universe=None, tomb=0.1):
    pool = [random_value(rng) for _ in range(ndv)]
    seqs = rng.sample(range(1, n * 3), n)
    out = []
    for s in seqs:
        k = random_key(rng, universe or n, 16)
        if rng.random() < tomb:
            out.append((k, s, Kind.TOMBSTONE, None))
        else:
            out.append((k, s, Kind.PUT, rng.choice(pool)))
    return out


def test_column_width_reserves_sentinel():
    assert column_width(0) == 1 and column_width(1) == 2 and column_width(2) == 2
    assert column_width(6) == 3 and column_width(7) == 4
    for m in range(0, 300):
        w = column_width(m)
        assert tombstone_code(w) >= m


def test_empty_file_rejected(tmp_path):
    with pytest.raises(EmptyFile):
        write_sct(RowBatch.empty(16), str(tmp_path / "x.sct"), dictionary=OrderPreservingDictionary([]))


def test_unsorted_rejected(tmp_path):
    b = make_batch([(b"b" * 16, 1, Kind.PUT, b"v"), (b"a" * 16, 2, Kind.PUT, b"v")], 16)
    bad = RowBatch(b.keys[::-1].copy(), b.seqs[::-1].copy(), b.kinds, values=b.values)
    with pytest.raises(UnsortedInput):
        write_sct(bad, str(tmp_path / "x.sct"), dictionary=OrderPreservingDictionary([b"v"]))


def test_code_out_of_range_rejected(tmp_path):
    b = make_batch([(b"a" * 16, 1, Kind.PUT, b"v")], 16)
    b = RowBatch(b.keys, b.seqs, b.kinds, codes=np.array([5], np.uint32))
    with pytest.raises(CodeOutOfRange):
        write_sct(b, str(tmp_path / "x.sct"), dictionary=OrderPreservingDictionary([b"v"]))


def test_three_rows_tiny_code_column(tmp_path):
    rows = [(bytes([i]) * 16, i + 1, Kind.PUT, v) for i, v in enumerate([b"a", b"b", b"a"])]
    desc = write_rows(rows, str(tmp_path / "x.sct"), 1)
    assert desc.dictionary.code_width_bits == 1 and desc.code_width_bits == 2
    with SctReader(desc.path) as r:
        assert r.read_codes().tolist() == [0, 1, 0]


@pytest.mark.parametrize("layout", [LAYOUT_ENCODED, LAYOUT_PLAIN])
def test_roundtrip_100k_rows(tmp_path, layout):
    rng = random.Random(4)
    rows = _rows(rng, 100_000, 1000, universe=60_000)
    desc = write_rows(rows, str(tmp_path / "x.sct"), 9, layout=layout)
    back = decode_file(desc.path)
    expect = sorted(rows, key=lambda r: (r[0], -r[1]))
    assert back == [(k, s, kd, v) for k, s, kd, v in expect]
    assert desc.entry_count == 100_000
    assert desc.min_key == expect[0][0] and desc.max_key == expect[-1][0]
    assert desc.file_size_bytes == os.path.getsize(desc.path)


def test_rewrite_is_byte_identical(tmp_path):
    rng = random.Random(8)
    rows = _rows(rng, 5000, 50)
    a = write_rows(rows, str(tmp_path / "a.sct"), 3)
    d, batch = read_sct(a.path)
    b = write_sct(batch, str(tmp_path / "b.sct"), sct_id=3, dictionary=d.dictionary, fsync=False)
    assert open(a.path, "rb").read() == open(b.path, "rb").read()


def test_corruption_detected(tmp_path):
    rng = random.Random(9)
    desc = write_rows(_rows(rng, 3000, 40), str(tmp_path / "x.sct"), 1)
    raw = bytearray(open(desc.path, "rb").read())
    for pos in [BLOCK_SIZE + 10, len(raw) // 2, len(raw) - 40]:
        bad = bytearray(raw)
        bad[pos] ^= 0x5A
        path = str(tmp_path / f"bad{pos}.sct")
        open(path, "wb").write(bytes(bad))
        with pytest.raises((ChecksumMismatch, CorruptFile)):
            with SctReader(path) as r:
                r.read_all()
                r.read_codes()


def test_bloom_has_no_false_negatives(tmp_path):
    rng = random.Random(12)
    rows = _rows(rng, 20_000, 100, tomb=0)
    desc = write_rows(rows, str(tmp_path / "x.sct"), 1)
    with SctReader(desc.path) as r:
        for k, s, _, v in rng.sample(rows, 500):
            rec = r.point_probe(k, 2**62)
            assert rec is not None and rec.user_key == k


def test_point_probe_returns_newest_visible(tmp_path):
    k = b"k" * 16
    rows = [(k, 10, Kind.PUT, b"new"), (k, 5, Kind.TOMBSTONE, None), (k, 2, Kind.PUT, b"old")]
    desc = write_rows(rows, str(tmp_path / "x.sct"), 1)
    with SctReader(desc.path) as r:
        assert r.decode_record(r.point_probe(k, 20)) == b"new"
        assert r.point_probe(k, 7).kind == Kind.TOMBSTONE
        assert r.decode_record(r.point_probe(k, 3)) == b"old"
        assert r.point_probe(k, 1) is None


def test_absent_keys_mostly_skip_blocks(tmp_path):
    rng = random.Random(13)
    rows = [((2 * i).to_bytes(16, "big"), i + 1, Kind.PUT, b"v") for i in range(20_000)]
    desc = write_rows(rows, str(tmp_path / "x.sct"), 1)
    with SctReader(desc.path) as r:
        probes = [(2 * rng.randrange(20_000) + 1).to_bytes(16, "big") for _ in range(3000)]
        before = r.stats["blocks_read"]
        for p in probes:
            assert r.point_probe(p, 2**62) is None
        read = r.stats["blocks_read"] - before
        skipped = r.stats["bloom_skips"]
    # each probe has one candidate block; the bloom should reject about 99% of them
    assert skipped / (skipped + read) >= 0.97


def test_estimate_is_an_upper_bound(tmp_path):
    rng = random.Random(14)
    for layout in (LAYOUT_ENCODED, LAYOUT_PLAIN):
        rows = _rows(rng, 30_000, 300)
        desc = write_rows(rows, str(tmp_path / f"x{layout}.sct"), 1, layout=layout)
        vals = [r[3] for r in rows if r[2] == Kind.PUT]
        distinct = set(vals)
        est = estimate_file_size(len(rows), key_size=16, layout=layout, ndv=len(distinct),
                                 dict_value_bytes=sum(map(len, distinct)),
                                 plain_value_bytes=sum(map(len, vals)),
                                 max_value_len=max(map(len, vals)))
        assert desc.file_size_bytes <= est <= desc.file_size_bytes * 1.1 + 2 * BLOCK_SIZE


def test_compressed_size_ratio_near_four(tmp_path):
    """16-byte keys, 64-byte values, 1% NDV: encoded file vs plain file."""
    rng = random.Random(15)
    pool = [rng.randbytes(8) + str(i).zfill(56).encode() for i in range(1000)]
    rows = [(i.to_bytes(16, "big"), i + 1, Kind.PUT, rng.choice(pool)) for i in range(100_000)]
    enc = write_rows(rows, str(tmp_path / "e.sct"), 1, layout=LAYOUT_ENCODED)
    plain = write_rows(rows, str(tmp_path / "p.sct"), 2, layout=LAYOUT_PLAIN)
    factor = plain.file_size_bytes / enc.file_size_bytes
    assert 3.0 <= factor <= 5.0


@pytest.mark.parametrize("layout", [LAYOUT_ENCODED, LAYOUT_PLAIN])
def test_every_single_byte_flip_detected(tmp_path, layout):
    rng = random.Random(10)
    desc = write_rows(_rows(rng, 400, 30), str(tmp_path / "x.sct"), 1, layout=layout)
    raw = open(desc.path, "rb").read()
    path = str(tmp_path / "bad.sct")
    for pos in range(len(raw)):
        bad = bytearray(raw)
        bad[pos] ^= 0x01
        open(path, "wb").write(bytes(bad))
        with pytest.raises((ChecksumMismatch, CorruptFile)):
            with SctReader(path) as r:
                r.read_all()

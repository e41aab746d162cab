"""Sorted Compressed Table (SCT) files.

Layout, all integers little-endian, every block CRC32C-protected:

* header block (4096 B): magic ``SCT1``, version u16, key_size u16,
  code_width_bits u8, layout u8, bloom hash count u8, zero padding, crc32c u32 at the end.
* key blocks (4096 B each): ``[row_count u16][keys][seqs u64][kind bits]
  [pad][crc32c u32]``.
* value-column blocks.  Encoded layout: code blocks
  ``[row_count u16][bit-packed codes][pad][crc32c]``.  Plain layout (the
  uncompressed baseline): value blocks ``[row_count u16][offsets u16 *
  (row_count+1)][value bytes][pad][crc32c]``, one or more 4096 B units.
* dictionary section (encoded layout only): ``[m u32][offsets u32 *
  (m+1)][value bytes][crc32c]`` padded to whole blocks.
* meta section: per key block its offset, row range, first/last key and
  bloom filter; per value-column block its offset, length and row range;
  crc32c.
* footer: section offsets, counts, min/max key and seq, then a fixed tail
  ``key_size u16, code_width u8, layout u8, version u16, crc32c u32,
  magic``.
"""
from __future__ import annotations

import math
import os
import struct
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum

import crc32c as _crc
import numpy as np

from . import bitpack, bloom
from .config import BLOCK_SIZE
from .dictionary import OrderPreservingDictionary
from .errors import ChecksumMismatch, CodeOutOfRange, CorruptFile, EmptyFile, UnsortedInput
from .rows import Kind, RowBatch, is_sorted, key_bytes, key_dtype

MAGIC = b"SCT1"
FORMAT_VERSION = 1
LAYOUT_ENCODED = 0
LAYOUT_PLAIN = 1

_HEADER = struct.Struct("<4sHHBBB")
_TAIL = struct.Struct("<HBBHI4s")
_FOOTER_HEAD = struct.Struct("<QQQQQIQIQQQQ")
_KB_META = struct.Struct("<QII")
_VB_META = struct.Struct("<QIII")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


def crc32c(data) -> int:
    return _crc.crc32c(data)


class BlockKind(IntEnum):
    KEY = 0
    CODE = 1
    VALUE = 2
    META = 3
    DICT = 4


@dataclass
class BlockMeta:
    block_offset: int
    block_kind: BlockKind
    length: int
    row_range: tuple[int, int]
    first_key: bytes | None = None
    last_key: bytes | None = None
    bloom: bytes | None = None


@dataclass
class EntryRecord:
    user_key: bytes
    seq: int
    kind: Kind
    code: int | None = None
    value: bytes | None = None


@dataclass
class SctDescriptor:
    sct_id: int
    path: str
    key_size: int
    layout: int
    code_width_bits: int
    entry_count: int
    min_key: bytes
    max_key: bytes
    min_seq: int
    max_seq: int
    dictionary: OrderPreservingDictionary | None
    block_index: list[BlockMeta]
    file_size_bytes: int
    level: int = 0

    @property
    def key_blocks(self) -> list[BlockMeta]:
        return [b for b in self.block_index if b.block_kind == BlockKind.KEY]

    @property
    def value_blocks(self) -> list[BlockMeta]:
        return [b for b in self.block_index if b.block_kind != BlockKind.KEY]

    def overlaps(self, lo: bytes, hi: bytes) -> bool:
        """Key range intersects the closed interval [lo, hi]."""
        return not (self.max_key < lo or self.min_key > hi)


def column_width(m: int) -> int:
    """Bits per code, leaving the all-ones pattern free as tombstone sentinel."""
    return max(1, math.ceil(math.log2(m + 2)))


def tombstone_code(width: int) -> int:
    return (1 << width) - 1


def rows_per_key_block(key_size: int) -> int:
    usable = BLOCK_SIZE - 2 - 4
    r = (usable * 8) // ((key_size + 8) * 8 + 1)
    while r > 0 and r * (key_size + 8) + (r + 7) // 8 > usable:
        r -= 1
    if r < 1:
        raise ValueError(f"key size {key_size} does not fit a block")
    return min(r, 0xFFFF)


def rows_per_code_block(width: int) -> int:
    return min(((BLOCK_SIZE - 6) * 8) // width, 0xFFFF)


def _pad_blocks(n: int) -> int:
    return -(-n // BLOCK_SIZE) * BLOCK_SIZE


def dict_section_size(m: int, value_bytes: int) -> int:
    return _pad_blocks(4 + 4 * (m + 1) + value_bytes + 4)


def _footer_size(key_size: int) -> int:
    return _FOOTER_HEAD.size + 2 * key_size + _TAIL.size


def _plain_block_bounds(lengths: np.ndarray) -> list[tuple[int, int, int]]:
    """Greedy row grouping for plain value blocks -> (start, end, block_len)."""
    out = []
    n = len(lengths)
    csum = np.concatenate(([0], np.cumsum(lengths, dtype=np.int64)))
    start = 0
    while start < n:
        # payload(r) = 2 + 2(r+1) + sum(len) + 4 must stay within one block
        cost = 8 + 2 * np.arange(1, n - start + 1) + (csum[start + 1:] - csum[start])
        r = int(np.searchsorted(cost, BLOCK_SIZE, side="right"))
        r = max(1, min(r, 0xFFFE))
        payload = 8 + 2 * r + int(csum[start + r] - csum[start])
        out.append((start, start + r, _pad_blocks(payload)))
        start += r
    return out


def estimate_file_size(n_rows, *, key_size: int, layout: int = LAYOUT_ENCODED,
                       ndv=0, dict_value_bytes=0, plain_value_bytes=0,
                       max_value_len: int = 64, bits_per_key: int = 10):
    """Upper estimate of the size :func:`write_sct` produces for ``n_rows`` rows.

    ``ndv``/``dict_value_bytes`` size the dictionary (encoded layout);
    ``plain_value_bytes`` is the total raw value bytes (plain layout).
    Row counts and value totals may be numpy arrays, one estimate each.
    """
    n_rows = np.asarray(n_rows, dtype=np.int64)
    rk = rows_per_key_block(key_size)
    n_kb = -(-n_rows // rk)
    filter_bytes = bloom.filter_bits(rk, bits_per_key) // 8
    meta = 8 + 4 + n_kb * (_KB_META.size + 2 * key_size + 4 + filter_bytes)
    size = BLOCK_SIZE + n_kb * BLOCK_SIZE
    if layout == LAYOUT_ENCODED:
        ndv = np.asarray(ndv, dtype=np.int64)
        width = np.maximum(1, np.ceil(np.log2(ndv + 2))).astype(np.int64)
        rc = np.minimum(((BLOCK_SIZE - 6) * 8) // width, 0xFFFF)
        n_vb = -(-n_rows // rc)
        dict_sec = -(-(4 + 4 * (ndv + 1) + np.asarray(dict_value_bytes, dtype=np.int64) + 4)
                     // BLOCK_SIZE) * BLOCK_SIZE
        size = size + n_vb * BLOCK_SIZE + dict_sec
    else:
        # per row: u16 offset plus bytes; per block: count, closing offset, crc,
        # and at most one value's worth of unused tail
        per_block = BLOCK_SIZE - 8 - (max_value_len + 2)
        if per_block <= 0:
            n_vb = n_rows * (-(-(max_value_len + 12) // BLOCK_SIZE))
        else:
            payload = 2 * n_rows + np.asarray(plain_value_bytes, dtype=np.int64)
            n_vb = -(-payload // per_block) + 1
        size = size + n_vb * BLOCK_SIZE
    meta = meta + n_vb * _VB_META.size
    out = np.where(n_rows > 0, size + meta + _footer_size(key_size), 0)
    return int(out) if out.ndim == 0 else out


def _encode_dict(d: OrderPreservingDictionary) -> bytes:
    vals = d.values
    lengths = np.fromiter((len(v) for v in vals), dtype=np.uint32, count=len(vals))
    offsets = np.zeros(len(vals) + 1, dtype="<u4")
    np.cumsum(lengths, out=offsets[1:])
    payload = _U32.pack(len(vals)) + offsets.tobytes() + b"".join(vals)
    payload += _U32.pack(crc32c(payload))
    return payload + b"\x00" * (_pad_blocks(len(payload)) - len(payload))


def _decode_dict(buf: bytes) -> OrderPreservingDictionary:
    (m,) = _U32.unpack_from(buf, 0)
    if 4 + 4 * (m + 1) > len(buf):
        raise CorruptFile("dictionary section truncated")
    offsets = np.frombuffer(buf, dtype="<u4", count=m + 1, offset=4).astype(np.int64)
    base = 4 + 4 * (m + 1)
    end = base + int(offsets[-1])
    if end + 4 > len(buf):
        raise CorruptFile("dictionary section truncated")
    (crc,) = _U32.unpack_from(buf, end)
    if crc32c(buf[:end]) != crc:
        raise ChecksumMismatch("dictionary section")
    if any(buf[end + 4:]):
        raise CorruptFile("dictionary section padding is not zero")
    blob = buf[base:end]
    off = offsets.tolist()
    return OrderPreservingDictionary([blob[off[i]:off[i + 1]] for i in range(m)], validate=False)


def _seal(block: bytearray) -> bytes:
    block[-4:] = _U32.pack(crc32c(bytes(block[:-4])))
    return bytes(block)


def write_sct(rows: RowBatch, path: str, *, sct_id: int = 0,
              dictionary: OrderPreservingDictionary | None = None,
              layout: int = LAYOUT_ENCODED, bits_per_key: int = 10, bloom_hashes: int = 7,
              fsync: bool = True) -> SctDescriptor:
    """Write ``rows`` (sorted by key asc, seq desc) as an SCT at ``path``.

    Encoded layout takes codes from ``rows.codes`` (or encodes
    ``rows.values`` with ``dictionary``); tombstone rows get the sentinel.
    The file is written to a temporary name and renamed into place.
    """
    n = len(rows)
    if n == 0:
        raise EmptyFile("refusing to write an SCT with no rows")
    if not is_sorted(rows.keys, rows.seqs):
        raise UnsortedInput("rows must be sorted by (key asc, seq desc)")
    key_size = rows.key_size
    tomb = rows.kinds == Kind.TOMBSTONE

    if layout == LAYOUT_ENCODED:
        if dictionary is None:
            raise ValueError("encoded layout needs a dictionary")
        width = column_width(dictionary.m)
        if rows.codes is not None:
            codes = np.asarray(rows.codes, dtype=np.uint32).copy()
        else:
            codes = np.zeros(n, dtype=np.uint32)
            put_idx = np.flatnonzero(~tomb)
            codes[put_idx] = dictionary.encode_many(rows.values[put_idx].tolist())
        put_codes = codes[~tomb]
        if put_codes.size and int(put_codes.max()) >= dictionary.m:
            raise CodeOutOfRange(f"code {int(put_codes.max())} >= m={dictionary.m}")
        codes[tomb] = tombstone_code(width)
    else:
        width = 1
        dictionary = None
        values = [b"" if t else v for v, t in zip(rows.values.tolist(), tomb.tolist())]

    out = bytearray()
    header = bytearray(BLOCK_SIZE)
    _HEADER.pack_into(header, 0, MAGIC, FORMAT_VERSION, key_size, width, layout, bloom_hashes)
    out += _seal(header)

    index: list[BlockMeta] = []
    key_blob = rows.keys.tobytes()
    seq_arr = rows.seqs.astype("<u8")
    rk = rows_per_key_block(key_size)
    for start in range(0, n, rk):
        end = min(n, start + rk)
        r = end - start
        block = bytearray(BLOCK_SIZE)
        _U16.pack_into(block, 0, r)
        pos = 2
        block[pos:pos + r * key_size] = key_blob[start * key_size:end * key_size]
        pos += r * key_size
        block[pos:pos + 8 * r] = seq_arr[start:end].tobytes()
        pos += 8 * r
        kb = np.packbits(rows.kinds[start:end].astype(np.uint8), bitorder="little").tobytes()
        block[pos:pos + len(kb)] = kb
        index.append(BlockMeta(len(out), BlockKind.KEY, BLOCK_SIZE, (start, end),
                               key_bytes(rows.keys[start], key_size),
                               key_bytes(rows.keys[end - 1], key_size),
                               bloom.build(rows.keys[start:end], bits_per_key, bloom_hashes)))
        out += _seal(block)
    key_off = BLOCK_SIZE

    val_off = len(out)
    if layout == LAYOUT_ENCODED:
        rc = rows_per_code_block(width)
        for start in range(0, n, rc):
            end = min(n, start + rc)
            block = bytearray(BLOCK_SIZE)
            _U16.pack_into(block, 0, end - start)
            packed = bitpack.pack(codes[start:end], width)
            block[2:2 + len(packed)] = packed
            index.append(BlockMeta(len(out), BlockKind.CODE, BLOCK_SIZE, (start, end)))
            out += _seal(block)
    else:
        lengths = np.fromiter((len(v) for v in values), dtype=np.int64, count=n)
        for start, end, blen in _plain_block_bounds(lengths):
            r = end - start
            block = bytearray(blen)
            _U16.pack_into(block, 0, r)
            offs = np.zeros(r + 1, dtype="<u2")
            np.cumsum(lengths[start:end], out=offs[1:])
            block[2:2 + 2 * (r + 1)] = offs.tobytes()
            base = 2 + 2 * (r + 1)
            blob = b"".join(values[start:end])
            block[base:base + len(blob)] = blob
            index.append(BlockMeta(len(out), BlockKind.VALUE, blen, (start, end)))
            out += _seal(block)
    n_vb = sum(1 for b in index if b.block_kind != BlockKind.KEY)
    n_kb = len(index) - n_vb

    dict_off = len(out)
    if dictionary is not None:
        out += _encode_dict(dictionary)
    dict_len = len(out) - dict_off

    meta = bytearray(struct.pack("<II", n_kb, n_vb))
    for b in index:
        if b.block_kind == BlockKind.KEY:
            meta += _KB_META.pack(b.block_offset, *b.row_range)
            meta += b.first_key + b.last_key + _U32.pack(len(b.bloom)) + b.bloom
        else:
            meta += _VB_META.pack(b.block_offset, b.length, *b.row_range)
    meta += _U32.pack(crc32c(bytes(meta)))
    meta_off = len(out)
    out += meta

    min_key = key_bytes(rows.keys[0], key_size)
    max_key = key_bytes(rows.keys[-1], key_size)
    min_seq, max_seq = int(rows.seqs.min()), int(rows.seqs.max())
    footer = _FOOTER_HEAD.pack(sct_id, n, min_seq, max_seq, key_off, n_kb, val_off, n_vb,
                               dict_off, dict_len, meta_off, len(meta)) + min_key + max_key
    tail_head = struct.pack("<HBBH", key_size, width, layout, FORMAT_VERSION)
    footer += tail_head + _U32.pack(crc32c(footer + tail_head)) + MAGIC
    out += footer

    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(out)
        if fsync:
            fh.flush()
            os.fsync(fh.fileno())
    os.replace(tmp, path)
    return SctDescriptor(sct_id, path, key_size, layout, width, n, min_key, max_key, min_seq,
                         max_seq, dictionary, index, len(out))


class SctReader:
    """Random and bulk access to one SCT file.

    Opening parses the footer, metadata and dictionary; the dictionary stays
    resident for the life of the reader.  Reads use ``pread`` so a reader
    can be shared between threads.
    """

    def __init__(self, path: str, *, stats: Counter | None = None):
        self.path = path
        self.stats = stats if stats is not None else Counter()
        self._fd = os.open(path, os.O_RDONLY)
        try:
            self.desc = self._load()
        except Exception:
            os.close(self._fd)
            raise
        d = self.desc
        kbs = d.key_blocks
        dt = key_dtype(d.key_size)
        self._kb = kbs
        self._vb = d.value_blocks
        self._kb_first = np.array([b.first_key for b in kbs], dtype=dt)
        self._kb_last = np.array([b.last_key for b in kbs], dtype=dt)
        self._vb_starts = np.array([b.row_range[0] for b in self._vb], dtype=np.int64)

    def _pread(self, n: int, off: int) -> bytes:
        data = os.pread(self._fd, n, off)
        if len(data) != n:
            raise CorruptFile(f"{self.path}: short read at {off}")
        self.stats["bytes_read"] += n
        return data

    def _load(self) -> SctDescriptor:
        size = os.fstat(self._fd).st_size
        if size < BLOCK_SIZE + _TAIL.size:
            raise CorruptFile(f"{self.path}: too small")
        key_size, width, layout, version, crc, magic = _TAIL.unpack(self._pread(_TAIL.size, size - _TAIL.size))
        if magic != MAGIC:
            raise CorruptFile(f"{self.path}: bad footer magic")
        if version != FORMAT_VERSION:
            raise CorruptFile(f"{self.path}: unsupported version {version}")
        fsize = _footer_size(key_size)
        footer = self._pread(fsize, size - fsize)
        if crc32c(footer[:-8]) != crc:
            raise ChecksumMismatch(f"{self.path}: footer")
        (sct_id, n, min_seq, max_seq, key_off, n_kb, val_off, n_vb, dict_off, dict_len,
         meta_off, meta_len) = _FOOTER_HEAD.unpack_from(footer, 0)
        p = _FOOTER_HEAD.size
        min_key = footer[p:p + key_size]
        max_key = footer[p + key_size:p + 2 * key_size]

        header = self._pread(BLOCK_SIZE, 0)
        if crc32c(header[:-4]) != _U32.unpack_from(header, BLOCK_SIZE - 4)[0]:
            raise ChecksumMismatch(f"{self.path}: header")
        hmagic, hver, hks, hwidth, hlayout, self.bloom_hashes = _HEADER.unpack_from(header, 0)
        if (hmagic, hver, hks, hwidth, hlayout) != (MAGIC, version, key_size, width, layout):
            raise CorruptFile(f"{self.path}: header and footer disagree")

        meta = self._pread(meta_len, meta_off)
        if crc32c(meta[:-4]) != _U32.unpack_from(meta, meta_len - 4)[0]:
            raise ChecksumMismatch(f"{self.path}: meta section")
        mkb, mvb = struct.unpack_from("<II", meta, 0)
        if (mkb, mvb) != (n_kb, n_vb):
            raise CorruptFile(f"{self.path}: block counts disagree")
        pos = 8
        index = []
        for _ in range(n_kb):
            off, rs, re_ = _KB_META.unpack_from(meta, pos)
            pos += _KB_META.size
            first = meta[pos:pos + key_size]
            last = meta[pos + key_size:pos + 2 * key_size]
            pos += 2 * key_size
            (blen,) = _U32.unpack_from(meta, pos)
            pos += 4
            index.append(BlockMeta(off, BlockKind.KEY, BLOCK_SIZE, (rs, re_), first, last,
                                   meta[pos:pos + blen]))
            pos += blen
        vkind = BlockKind.CODE if layout == LAYOUT_ENCODED else BlockKind.VALUE
        for _ in range(n_vb):
            off, length, rs, re_ = _VB_META.unpack_from(meta, pos)
            pos += _VB_META.size
            index.append(BlockMeta(off, vkind, length, (rs, re_)))

        dictionary = None
        if layout == LAYOUT_ENCODED:
            dictionary = _decode_dict(self._pread(dict_len, dict_off))
        return SctDescriptor(sct_id, self.path, key_size, layout, width, n, min_key, max_key,
                             min_seq, max_seq, dictionary, index, size)

    # block access -------------------------------------------------------

    def _checked(self, raw: bytes, what: str) -> bytes:
        if crc32c(raw[:-4]) != _U32.unpack_from(raw, len(raw) - 4)[0]:
            raise ChecksumMismatch(f"{self.path}: {what}")
        return raw

    def _parse_key_block(self, raw: bytes):
        ks = self.desc.key_size
        (r,) = _U16.unpack_from(raw, 0)
        keys = np.frombuffer(raw, dtype=key_dtype(ks), count=r, offset=2)
        seqs = np.frombuffer(raw, dtype="<u8", count=r, offset=2 + r * ks).astype(np.uint64)
        kb = np.frombuffer(raw, dtype=np.uint8, count=(r + 7) // 8, offset=2 + r * (ks + 8))
        kinds = np.unpackbits(kb, bitorder="little", count=r)
        return keys, seqs, kinds

    def _parse_code_block(self, raw: bytes) -> np.ndarray:
        (r,) = _U16.unpack_from(raw, 0)
        return bitpack.unpack(raw[2:], r, self.desc.code_width_bits)

    @staticmethod
    def _parse_value_block(raw: bytes) -> list[bytes]:
        (r,) = _U16.unpack_from(raw, 0)
        offs = np.frombuffer(raw, dtype="<u2", count=r + 1, offset=2).tolist()
        base = 2 + 2 * (r + 1)
        return [raw[base + offs[i]:base + offs[i + 1]] for i in range(r)]

    def read_block(self, block_idx: int):
        """Key block -> (keys, seqs, kinds); code block -> u32 codes; value block -> list."""
        b = self.desc.block_index[block_idx]
        raw = self._checked(self._pread(b.length, b.block_offset), f"block {block_idx}")
        self.stats["blocks_read"] += 1
        if b.block_kind == BlockKind.KEY:
            return self._parse_key_block(raw)
        if b.block_kind == BlockKind.CODE:
            return self._parse_code_block(raw)
        return self._parse_value_block(raw)

    def _read_region(self, blocks: list[BlockMeta]) -> tuple[bytes, int]:
        if not blocks:
            return b"", 0
        start = blocks[0].block_offset
        end = blocks[-1].block_offset + blocks[-1].length
        self.stats["blocks_read"] += len(blocks)
        return self._pread(end - start, start), start

    def read_keys(self, first: int = 0, last: int | None = None):
        """Key columns of key blocks ``first..last`` (default: whole file)."""
        blocks = self._kb[first:last]
        if not blocks:
            ks = self.desc.key_size
            return np.zeros(0, key_dtype(ks)), np.zeros(0, np.uint64), np.zeros(0, np.uint8)
        region, base = self._read_region(blocks)
        parts = [self._parse_key_block(self._checked(region[b.block_offset - base:b.block_offset - base + b.length], "key block"))
                 for b in blocks]
        return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts]))

    def read_codes(self) -> np.ndarray:
        """The whole code column unpacked to 32-bit lanes (no decoding)."""
        if self.desc.layout != LAYOUT_ENCODED:
            raise ValueError("plain-layout file has no code column")
        region, base = self._read_region(self._vb)
        if not self._vb:
            return np.zeros(0, np.uint32)
        return np.concatenate([self._parse_code_block(self._checked(region[b.block_offset - base:b.block_offset - base + b.length], "code block"))
                               for b in self._vb])

    def read_values(self) -> list[bytes]:
        if self.desc.layout != LAYOUT_PLAIN:
            raise ValueError("encoded-layout file has no raw value column")
        region, base = self._read_region(self._vb)
        out: list[bytes] = []
        for b in self._vb:
            out.extend(self._parse_value_block(self._checked(region[b.block_offset - base:b.block_offset - base + b.length], "value block")))
        return out

    def read_all(self) -> RowBatch:
        keys, seqs, kinds = self.read_keys()
        if self.desc.layout == LAYOUT_ENCODED:
            return RowBatch(keys, seqs, kinds, codes=self.read_codes())
        values = np.empty(len(keys), dtype=object)
        values[:] = self.read_values()
        return RowBatch(keys, seqs, kinds, values=values)

    def value_at(self, row: int):
        """Code (encoded layout) or raw value (plain layout) of one row."""
        j = int(np.searchsorted(self._vb_starts, row, side="right")) - 1
        col = self.read_block(len(self._kb) + j)
        return col[row - self._vb[j].row_range[0]]

    def candidate_key_blocks(self, key: bytes) -> range:
        probe = np.array([key], dtype=key_dtype(self.desc.key_size))
        lo = int(np.searchsorted(self._kb_last, probe[0], side="left"))
        hi = int(np.searchsorted(self._kb_first, probe[0], side="right"))
        return range(lo, hi)

    def key_block_span(self, lo: bytes, hi: bytes) -> tuple[int, int]:
        """Key blocks that may hold keys in [lo, hi)."""
        dt = key_dtype(self.desc.key_size)
        first = int(np.searchsorted(self._kb_last, np.array([lo], dt)[0], side="left"))
        last = int(np.searchsorted(self._kb_first, np.array([hi], dt)[0], side="left"))
        return first, max(first, last)

    def point_probe(self, key: bytes, read_seq: int) -> EntryRecord | None:
        """Newest record for ``key`` with seq <= read_seq, or None."""
        d = self.desc
        for bi in self.candidate_key_blocks(key):
            b = self._kb[bi]
            if not bloom.may_contain(b.bloom, key, self.bloom_hashes, d.key_size):
                self.stats["bloom_skips"] += 1
                continue
            keys, seqs, kinds = self.read_block(bi)
            probe = np.array([key], dtype=keys.dtype)[0]
            lo = int(np.searchsorted(keys, probe, side="left"))
            hi = int(np.searchsorted(keys, probe, side="right"))
            for i in range(lo, hi):
                s = int(seqs[i])
                if s <= read_seq:
                    row = b.row_range[0] + i
                    kind = Kind(int(kinds[i]))
                    if kind == Kind.TOMBSTONE:
                        return EntryRecord(key, s, kind)
                    v = self.value_at(row)
                    if d.layout == LAYOUT_ENCODED:
                        return EntryRecord(key, s, kind, code=int(v))
                    return EntryRecord(key, s, kind, value=v)
        return None

    def decode_record(self, rec: EntryRecord) -> bytes:
        if rec.value is not None:
            return rec.value
        return self.desc.dictionary.decode(rec.code)

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> SctReader:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_sct(path: str) -> tuple[SctDescriptor, RowBatch]:
    with SctReader(path) as r:
        return r.desc, r.read_all()

"""Analytical cost model for compaction and filter evaluation.

Three schemes are compared: ``plain`` (no compression), ``heavy``
(block compression such as LZ4 applied to whole files) and ``opd``
(values stored as order-preserving dictionary codes).  All logarithms
are base 2.  Costs are in abstract instructions; sizes in bytes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .config import MiB
from .errors import InvalidSpec

SCHEMES = ("plain", "heavy", "opd")


@dataclass(frozen=True)
class CostParams:
    """Workload, layout and per-byte cost constants (reference values by default)."""

    n_entries: int = 2**24
    file_size: float = 32 * MiB
    size_ratio: int = 10
    ndv_per_file: float = 1e5
    key_size: float = 16
    value_size: float = 64
    code_size: float = 4
    key_merge_cost: float = 1.0
    copy_cost: float = 0.3
    compress_cost: float = 50.0
    decompress_cost: float = 20.0
    scan_cost: float = 1.0
    selectivity: float = 0.01
    simd_bytes: float = 512
    heavy_ratio: float = 2.0

    def __post_init__(self) -> None:
        for name in ("n_entries", "file_size", "key_size", "value_size", "code_size", "simd_bytes",
                     "heavy_ratio"):
            if getattr(self, name) <= 0:
                raise InvalidSpec(f"{name} must be positive")
        if self.size_ratio < 2:
            raise InvalidSpec("size_ratio must be at least 2")
        if self.ndv_per_file < 1:
            raise InvalidSpec("ndv_per_file must be at least 1")
        for name in ("key_merge_cost", "copy_cost", "compress_cost", "decompress_cost", "scan_cost"):
            if getattr(self, name) < 0:
                raise InvalidSpec(f"{name} must be non-negative")
        if not 0 < self.selectivity <= 1:
            raise InvalidSpec("selectivity must be in (0, 1]")
        if self.code_size > self.value_size:
            raise InvalidSpec("code_size cannot exceed value_size")

    def with_(self, **kw) -> CostParams:
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


def level_of(index: int, size_ratio: int) -> int:
    """Level of the ``index``-th file (1-based) when levels grow by ``size_ratio``.

    Equals ``ceil(log_T(index*(T-1)+1))``, evaluated exactly on integers.
    """
    if index < 1:
        raise ValueError("file index starts at 1")
    target = index * (size_ratio - 1) + 1
    level, cap = 0, 1
    while cap < target:
        cap *= size_ratio
        level += 1
    return level


def level_sum(m: int, size_ratio: int) -> int:
    """Sum of ``level_of(i)`` for i = 1..m; level L holds ``size_ratio**(L-1)`` files."""
    total, first, level, width = 0, 1, 1, 1
    while first <= m:
        last = min(m, first + width - 1)
        total += level * (last - first + 1)
        first += width
        width *= size_ratio
        level += 1
    return total


def file_count(p: CostParams, scheme: str) -> int:
    """Files needed to hold all entries under ``scheme`` (at least one)."""
    plain = p.n_entries * (p.key_size + p.value_size) / p.file_size
    if scheme == "plain":
        raw = plain
    elif scheme == "heavy":
        raw = plain / p.heavy_ratio
    elif scheme == "opd":
        raw = p.n_entries * (p.key_size + p.code_size) / p.file_size
    else:
        raise InvalidSpec(f"unknown scheme {scheme!r}")
    return max(1, math.ceil(raw - 1e-9))


def compression_ratio(p: CostParams) -> float:
    """Whole-file compression ratio of the dictionary scheme, (key+value)/(key+code)."""
    return (p.key_size + p.value_size) / (p.key_size + p.code_size)


def compaction_io(p: CostParams, m: int | None = None, scheme: str = "plain") -> float:
    """Bytes moved by compactions over ``m`` files: each file rewritten T times per level."""
    m = file_count(p, scheme) if m is None else m
    if m < 1:
        raise InvalidSpec("m must be at least 1")
    return p.file_size * p.size_ratio * level_sum(m, p.size_ratio)


def compaction_cpu_per_file(p: CostParams, scheme: str, m: int | None = None) -> float:
    m = file_count(p, scheme) if m is None else m
    keys = p.n_entries / m * p.key_size * p.key_merge_cost
    if scheme == "plain":
        return keys + p.file_size * p.copy_cost
    if scheme == "heavy":
        return keys + p.file_size * (p.copy_cost + p.decompress_cost + p.compress_cost)
    if scheme == "opd":
        return keys + p.file_size * p.copy_cost + p.value_size * p.scan_cost * xlog2x(p.ndv_per_file)
    raise InvalidSpec(f"unknown scheme {scheme!r}")


def compaction_cpu(p: CostParams, scheme: str, m: int | None = None) -> float:
    """Total compaction CPU: per-file merge, copy (and recode or dictionary) work, times l_i*T."""
    m = file_count(p, scheme) if m is None else m
    return compaction_cpu_per_file(p, scheme, m) * p.size_ratio * level_sum(m, p.size_ratio)


def i1_rhs(p: CostParams) -> float:
    return p.file_size / p.value_size * (p.value_size - p.code_size) / (p.key_size + p.code_size)


def i1_border(p: CostParams) -> int:
    """Largest integer NDV per file whose ``D*log2(D)`` stays below the break-even bound."""
    rhs = i1_rhs(p)
    if xlog2x(1) >= rhs:
        return 0
    lo, hi = 1, 2
    while xlog2x(hi) < rhs:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xlog2x(mid) < rhs:
            lo = mid
        else:
            hi = mid
    return lo


def border_fraction(p: CostParams) -> float:
    """The break-even NDV as a fraction of the entries one encoded file holds."""
    return i1_border(p) / (p.file_size / (p.key_size + p.code_size))


def filter_terms(p: CostParams, scheme: str) -> dict[str, float]:
    """Per-term filter CPU: value comparison, decompression and result assembly."""
    n = p.n_entries
    out = {"decompress": 0.0, "dictionary": 0.0,
           "assemble": p.selectivity * n * (p.key_size * p.key_merge_cost
                                            + (p.key_size + p.value_size) * p.copy_cost)}
    if scheme == "plain":
        out["compare"] = n * p.value_size * p.scan_cost
    elif scheme == "heavy":
        out["compare"] = n * p.value_size * p.scan_cost
        out["decompress"] = file_count(p, "heavy") * p.file_size * p.decompress_cost
    elif scheme == "opd":
        m = file_count(p, "opd")
        out["dictionary"] = m * math.log2(p.ndv_per_file) * p.value_size * p.scan_cost
        out["compare"] = n * p.code_size * p.scan_cost / p.simd_bytes
    else:
        raise InvalidSpec(f"unknown scheme {scheme!r}")
    return out


def filter_cpu(p: CostParams, scheme: str) -> float:
    return sum(filter_terms(p, scheme).values())


def filter_io(p: CostParams, scheme: str) -> float:
    """Bytes read by one filter: every file once."""
    return file_count(p, scheme) * p.file_size


def report(p: CostParams) -> list[dict]:
    """One row per scheme with every modelled quantity."""
    rows = []
    for s in SCHEMES:
        rows.append({"scheme": s, "files": file_count(p, s), "compaction_io": compaction_io(p, scheme=s),
                     "compaction_cpu": compaction_cpu(p, s), "filter_io": filter_io(p, s),
                     "filter_cpu": filter_cpu(p, s)})
    return rows

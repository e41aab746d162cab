from __future__ import annotations

from dataclasses import dataclass, asdict

KiB = 1024
MiB = 1024 * KiB

BLOCK_SIZE = 4096


@dataclass
class EngineConfig:
    """Tunables for one engine instance.

    ``mode`` selects the value layout: ``"opd"`` stores values as
    order-preserving dictionary codes, ``"naive"`` stores raw values and
    compacts by decoding and merging strings (the uncompressed baseline).
    """

    key_size: int = 16
    file_size: int = 32 * MiB
    size_ratio: int = 10
    max_levels: int = 5
    memtable_capacity: int = 8 * MiB
    l0_compaction_trigger: int = 4
    l0_stall_threshold: int = 8
    max_value_size: int = 4 * KiB
    bloom_bits_per_key: int = 10
    bloom_hashes: int = 7
    mode: str = "opd"
    auto_compact: bool = True
    background: bool = False
    stall_timeout: float = 30.0
    bulk_read_files: int = 2
    filter_workers: int = 1
    fsync: bool = True

    def __post_init__(self) -> None:
        if self.mode not in ("opd", "naive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 1 <= self.key_size <= 1024:
            raise ValueError("key_size must be in [1, 1024]")
        if self.size_ratio < 2:
            raise ValueError("size_ratio must be >= 2")
        if self.max_levels < 2:
            raise ValueError("max_levels must be >= 2")
        if self.file_size < 8 * BLOCK_SIZE:
            raise ValueError("file_size must hold at least 8 blocks")
        if self.l0_stall_threshold < self.l0_compaction_trigger:
            raise ValueError("stall threshold below compaction trigger")

    def level_capacity(self, level: int) -> float:
        """Byte budget of ``level`` (>= 1): ``size_ratio**(level-1)`` files; the last level is unbounded.

        Level 1 holds one file, level 2 holds T, and so on, so the i-th file
        sits at level ``ceil(log_T(i*(T-1)+1))``.
        """
        if level >= self.max_levels - 1:
            return float("inf")
        return float(self.file_size * self.size_ratio ** (level - 1))

    def to_dict(self) -> dict:
        return asdict(self)

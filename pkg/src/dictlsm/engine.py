"""The embeddable engine: public API, manifest, snapshots, flush and compaction scheduling."""
from __future__ import annotations

import glob
import json
import logging
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import query
from .compaction import CompactionJob, CompactionResult, compact, compact_naive, divide
from .config import EngineConfig
from .dictionary import OrderPreservingDictionary
from .errors import CorruptManifest, EngineError, KeySizeMismatch, Stalled, ValueTooLarge
from .memtable import FrozenMemtable, Memtable
from .predicates import ValuePredicate
from .rows import Kind, RowBatch, gc_mask
from .sct import LAYOUT_ENCODED, LAYOUT_PLAIN, SctReader, write_sct

log = logging.getLogger(__name__)

MANIFEST = "MANIFEST"
MAX_SEQ = 2**64 - 1


def sct_filename(sct_id: int) -> str:
    return f"sct_{sct_id:06d}.sct"


@dataclass(frozen=True)
class Version:
    """Immutable file layout; level 0 newest first, deeper levels in key order."""

    number: int
    levels: tuple[tuple[SctReader, ...], ...]

    def file_ids(self) -> set[int]:
        return {r.desc.sct_id for files in self.levels for r in files}


@dataclass
class Snapshot:
    read_seq: int
    version: Version
    memtables: tuple[Memtable, ...]
    _engine: Engine | None = field(default=None, repr=False)

    @property
    def files(self) -> dict[int, OrderPreservingDictionary | None]:
        return {r.desc.sct_id: r.desc.dictionary for files in self.version.levels for r in files}

    def release(self) -> None:
        if self._engine is not None:
            self._engine.release(self)

    def __enter__(self) -> Snapshot:
        return self

    def __exit__(self, *exc) -> None:
        self.release()


class Engine:
    """Log-structured key-value store with dictionary-encoded values.

    Keys are fixed-width byte strings; values are byte strings.  Every
    write gets a fresh sequence number, which doubles as the MVCC
    timestamp.  Reads run against a snapshot, implicitly the latest one.
    """

    def __init__(self, path: str, config: EngineConfig):
        self.path = path
        self.config = config
        self.layout = LAYOUT_ENCODED if config.mode == "opd" else LAYOUT_PLAIN
        self._stats: Counter = Counter()
        self._lock = threading.RLock()
        self._cond = threading.Condition(self._lock)
        self._active = Memtable(config.key_size)
        self._immutables: list[Memtable] = []
        self._last_seq = 0
        self._next_sct_id = 1
        self._version = Version(0, tuple(() for _ in range(config.max_levels)))
        self._pinned: Counter = Counter()
        self._pinned_versions: dict[int, Version] = {}
        self._snapshots: Counter = Counter()
        self._obsolete: dict[int, SctReader] = {}
        self._compact_ptr: dict[int, bytes] = {}
        self._closed = False
        self._worker: threading.Thread | None = None
        self._worker_error: BaseException | None = None
        self._busy = False

    # lifecycle ------------------------------------------------------------

    @classmethod
    def open(cls, path: str, config: EngineConfig | None = None) -> Engine:
        config = config or EngineConfig()
        os.makedirs(path, exist_ok=True)
        eng = cls(path, config)
        eng._recover()
        if config.background:
            eng._worker = threading.Thread(target=eng._background_loop, name="dictlsm-bg", daemon=True)
            eng._worker.start()
        return eng

    def _recover(self) -> None:
        mpath = os.path.join(self.path, MANIFEST)
        for tmp in glob.glob(os.path.join(self.path, "*.tmp")):
            os.remove(tmp)
        if not os.path.exists(mpath):
            self._write_manifest()
            return
        try:
            with open(mpath) as fh:
                doc = json.load(fh)
            levels_doc = doc["levels"]
            self._last_seq = int(doc["last_seq"])
            self._next_sct_id = int(doc["next_sct_id"])
            vnum = int(doc["version"])
            saved = doc.get("config", {})
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CorruptManifest(f"unreadable manifest: {exc}") from exc
        if saved.get("key_size", self.config.key_size) != self.config.key_size:
            raise CorruptManifest("manifest key size differs from config")
        if saved.get("mode", self.config.mode) != self.config.mode:
            raise CorruptManifest("manifest mode differs from config")
        if len(levels_doc) > self.config.max_levels:
            raise CorruptManifest("manifest has more levels than configured")
        levels: list[list[SctReader]] = [[] for _ in range(self.config.max_levels)]
        try:
            for lvl, files in enumerate(levels_doc):
                for f in files:
                    fpath = os.path.join(self.path, f["path"])
                    if not os.path.exists(fpath):
                        raise CorruptManifest(f"missing file {f['path']}")
                    try:
                        r = SctReader(fpath, stats=self._stats)
                    except EngineError as exc:
                        raise CorruptManifest(f"bad file {f['path']}: {exc}") from exc
                    if r.desc.sct_id != f["id"] or r.desc.min_key.hex() != f["min_key"] \
                            or r.desc.max_key.hex() != f["max_key"]:
                        r.close()
                        raise CorruptManifest(f"file {f['path']} does not match manifest")
                    r.desc.level = lvl
                    levels[lvl].append(r)
            for lvl in range(1, len(levels)):
                files = levels[lvl]
                for a, b in zip(files, files[1:]):
                    if not a.desc.max_key < b.desc.min_key:
                        raise CorruptManifest(f"level {lvl} files overlap")
        except CorruptManifest:
            for files in levels:
                for r in files:
                    r.close()
            raise
        self._version = Version(vnum, tuple(tuple(f) for f in levels))
        live = {sct_filename(i) for i in self._version.file_ids()}
        for p in glob.glob(os.path.join(self.path, "sct_*.sct")):
            if os.path.basename(p) not in live:
                os.remove(p)

    def _write_manifest(self) -> None:
        doc = {
            "format": 1,
            "version": self._version.number,
            "next_sct_id": self._next_sct_id,
            "last_seq": self._last_seq,
            "config": {"key_size": self.config.key_size, "mode": self.config.mode,
                       "size_ratio": self.config.size_ratio, "max_levels": self.config.max_levels},
            "levels": [[{"id": r.desc.sct_id, "path": os.path.basename(r.path),
                         "min_key": r.desc.min_key.hex(), "max_key": r.desc.max_key.hex(),
                         "entries": r.desc.entry_count, "size": r.desc.file_size_bytes}
                        for r in files] for files in self._version.levels],
        }
        mpath = os.path.join(self.path, MANIFEST)
        tmp = mpath + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=1)
            if self.config.fsync:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, mpath)
        if self.config.fsync:
            dfd = os.open(self.path, os.O_RDONLY)
            try:
                os.fsync(dfd)
            finally:
                os.close(dfd)

    def close(self) -> None:
        """Flush buffered writes, stop the worker and release file handles."""
        if self._closed:
            return
        if self._worker_error is None:
            self.flush()
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        if self._worker is not None:
            self._worker.join()
        with self._lock:
            for files in self._version.levels:
                for r in files:
                    r.close()
            for r in self._obsolete.values():
                r.close()

    def __enter__(self) -> Engine:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # writes ---------------------------------------------------------------

    def _check_write(self, key: bytes, value: bytes = b"") -> None:
        if len(key) != self.config.key_size:
            raise KeySizeMismatch(f"key of {len(key)} bytes, expected {self.config.key_size}")
        if len(value) > self.config.max_value_size:
            raise ValueTooLarge(f"value of {len(value)} bytes exceeds {self.config.max_value_size}")

    def _wait_for_room(self) -> None:
        cfg = self.config
        if len(self._version.levels[0]) < cfg.l0_stall_threshold and len(self._immutables) < 2:
            return
        if not cfg.background:
            if len(self._version.levels[0]) >= cfg.l0_stall_threshold:
                raise Stalled(f"level 0 holds {len(self._version.levels[0])} files")
            return
        t0 = time.perf_counter()
        deadline = t0 + cfg.stall_timeout
        while (len(self._version.levels[0]) >= cfg.l0_stall_threshold or len(self._immutables) >= 2):
            self._raise_worker_error()
            left = deadline - time.perf_counter()
            if left <= 0 or not cfg.auto_compact and len(self._version.levels[0]) >= cfg.l0_stall_threshold:
                self._stats["stall_seconds"] += time.perf_counter() - t0
                raise Stalled(f"level 0 holds {len(self._version.levels[0])} files")
            self._cond.wait(min(left, 0.1))
        self._stats["stall_seconds"] += time.perf_counter() - t0
        self._stats["stalls"] += 1

    def _write(self, key: bytes, kind: Kind, value: bytes) -> int:
        with self._cond:
            if self._closed:
                raise EngineError("engine is closed")
            self._wait_for_room()
            seq = self._last_seq + 1
            if kind == Kind.PUT:
                self._active.put(key, value, seq)
            else:
                self._active.delete(key, seq)
            self._last_seq = seq
            full = self._active.byte_size >= self.config.memtable_capacity
            if full:
                self._rotate_memtable()
        if full and not self.config.background:
            self._drain_sync()
        return seq

    def put(self, key: bytes, value: bytes) -> int:
        self._check_write(key, value)
        return self._write(key, Kind.PUT, value)

    def delete(self, key: bytes) -> int:
        self._check_write(key)
        return self._write(key, Kind.TOMBSTONE, b"")

    def _rotate_memtable(self) -> None:
        self._active.freeze()
        self._immutables.insert(0, self._active)
        self._active = Memtable(self.config.key_size)
        self._cond.notify_all()

    # snapshots ------------------------------------------------------------

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def snapshot(self) -> Snapshot:
        with self._lock:
            snap = Snapshot(self._last_seq, self._version,
                            (self._active, *self._immutables), self)
            self._pin(snap.version)
            self._snapshots[snap.read_seq] += 1
            return snap

    def release(self, snap: Snapshot) -> None:
        with self._lock:
            if snap._engine is None:
                return
            snap._engine = None
            self._snapshots[snap.read_seq] -= 1
            if self._snapshots[snap.read_seq] <= 0:
                del self._snapshots[snap.read_seq]
            self._unpin(snap.version)

    def _pin(self, v: Version) -> None:
        self._pinned[v.number] += 1
        self._pinned_versions[v.number] = v

    def _unpin(self, v: Version) -> None:
        self._pinned[v.number] -= 1
        if self._pinned[v.number] <= 0:
            del self._pinned[v.number]
            del self._pinned_versions[v.number]
        self._delete_unreferenced()

    def _delete_unreferenced(self) -> None:
        live = set(self._version.file_ids())
        for v in self._pinned_versions.values():
            live |= v.file_ids()
        for sid in [s for s in self._obsolete if s not in live]:
            r = self._obsolete.pop(sid)
            r.close()
            try:
                os.remove(r.path)
            except FileNotFoundError:
                pass
            self._stats["files_deleted"] += 1

    def live_file_ids(self) -> set[int]:
        with self._lock:
            return set(self._version.file_ids())

    def pinned_file_ids(self) -> set[int]:
        with self._lock:
            out: set[int] = set()
            for v in self._pinned_versions.values():
                out |= v.file_ids()
            return out

    def oldest_snapshot_seq(self) -> int:
        with self._lock:
            return min(min(self._snapshots, default=self._last_seq), self._last_seq)

    def _view(self, snap: Snapshot) -> query.ReadView:
        return query.ReadView(snap.read_seq, snap.memtables, snap.version.levels,
                              self.config.key_size, self.config.bulk_read_files,
                              self.config.filter_workers)

    class _Transient:
        def __init__(self, eng: Engine, snap: Snapshot | None):
            self.eng, self.given, self.snap = eng, snap, snap

        def __enter__(self) -> Snapshot:
            if self.snap is None:
                self.snap = self.eng.snapshot()
            return self.snap

        def __exit__(self, *exc) -> None:
            if self.given is None:
                self.eng.release(self.snap)

    # reads ----------------------------------------------------------------

    def get(self, key: bytes, snapshot: Snapshot | None = None) -> bytes | None:
        with self._Transient(self, snapshot) as snap:
            return query.point_lookup(self._view(snap), key, self._stats)

    def scan(self, key_low: bytes, key_high: bytes, snapshot: Snapshot | None = None) -> list[tuple[bytes, bytes]]:
        with self._Transient(self, snapshot) as snap:
            return query.range_lookup(self._view(snap), key_low, key_high, self._stats)

    def filter(self, predicate: ValuePredicate, snapshot: Snapshot | None = None) -> query.FilterResult:
        with self._Transient(self, snapshot) as snap:
            res = query.filter_values(self._view(snap), predicate)
        for k, v in res.stats.items():
            self._stats[f"filter_{k}"] += v
        self._stats["filters"] += 1
        return res

    # flush ----------------------------------------------------------------

    def _allocate(self) -> tuple[int, str]:
        with self._lock:
            sid = self._next_sct_id
            self._next_sct_id += 1
        return sid, os.path.join(self.path, sct_filename(sid))

    def _flush_memtable(self, mt: Memtable) -> None:
        t0 = time.perf_counter()
        cfg = self.config
        batch = FrozenMemtable(mt).to_batch()
        keep = gc_mask(batch.keys, batch.seqs, batch.kinds, self.oldest_snapshot_seq(), False)
        batch = batch.take(keep)
        readers = []
        if len(batch):
            put = batch.kinds == Kind.PUT
            ids: dict[bytes, int] = {}
            vals = batch.values.tolist()
            value_ids = np.fromiter((ids.setdefault(v, len(ids)) if p else -1 for v, p in zip(vals, put.tolist())),
                                    np.int64, len(batch))
            value_lens = np.fromiter((len(v) for v in vals), np.int64, len(batch))
            for s, e in divide(batch, cfg.file_size, value_ids=value_ids, value_lens=value_lens,
                               layout=self.layout, bits_per_key=cfg.bloom_bits_per_key):
                part = batch.slice(s, e)
                sid, path = self._allocate()
                d = None
                if self.layout == LAYOUT_ENCODED:
                    d = OrderPreservingDictionary.build(part.values[part.kinds == Kind.PUT].tolist())
                desc = write_sct(part, path, sct_id=sid, dictionary=d, layout=self.layout,
                                 bits_per_key=cfg.bloom_bits_per_key, bloom_hashes=cfg.bloom_hashes,
                                 fsync=cfg.fsync)
                self._stats["flush_bytes_written"] += desc.file_size_bytes
                self._stats["flush_rows_written"] += len(part)
                readers.append(SctReader(path, stats=self._stats))
        with self._cond:
            levels = list(self._version.levels)
            levels[0] = tuple(readers) + levels[0]
            self._install(levels)
            self._immutables.remove(mt)
            self._stats["flushes"] += 1
            self._stats["flush_seconds"] += time.perf_counter() - t0
            self._cond.notify_all()

    def _install(self, levels: list[tuple[SctReader, ...]]) -> None:
        for lvl, files in enumerate(levels):
            for r in files:
                r.desc.level = lvl
        self._version = Version(self._version.number + 1, tuple(levels))
        self._write_manifest()

    def flush(self) -> None:
        """Freeze the active memtable (if non-empty) and write it to level 0."""
        with self._cond:
            if self._active.count:
                self._rotate_memtable()
        if self.config.background:
            self.wait_idle()
        else:
            self._drain_sync()

    def _drain_sync(self) -> None:
        while True:
            with self._lock:
                if not self._immutables:
                    break
                mt = self._immutables[-1]
            self._flush_memtable(mt)
        if self.config.auto_compact:
            while self.compact_once():
                pass

    # compaction -----------------------------------------------------------

    def level_bytes(self, level: int) -> int:
        return sum(r.desc.file_size_bytes for r in self._version.levels[level])

    def _pick_job(self) -> CompactionJob | None:
        cfg = self.config
        levels = self._version.levels
        if len(levels[0]) >= cfg.l0_compaction_trigger:
            return self._job_for(0, list(levels[0]))
        for lvl in range(1, cfg.max_levels - 1):
            if self.level_bytes(lvl) > cfg.level_capacity(lvl):
                files = levels[lvl]
                ptr = self._compact_ptr.get(lvl)
                victim = next((r for r in files if ptr is None or r.desc.min_key > ptr), files[0])
                self._compact_ptr[lvl] = victim.desc.max_key
                return self._job_for(lvl, [victim])
        return None

    def _job_for(self, level: int, upper: list[SctReader]) -> CompactionJob:
        lo = min(r.desc.min_key for r in upper)
        hi = max(r.desc.max_key for r in upper)
        levels = self._version.levels
        lower = [r for r in levels[level + 1] if r.desc.overlaps(lo, hi)]
        if lower:
            lo = min(lo, lower[0].desc.min_key)
            hi = max(hi, lower[-1].desc.max_key)
        deeper = any(r.desc.overlaps(lo, hi) for files in levels[level + 2:] for r in files)
        return CompactionJob(upper, lower, level + 1, self.config.file_size,
                             bottom_level=not deeper, oldest_snapshot_seq=self.oldest_snapshot_seq())

    def run_job(self, job: CompactionJob) -> CompactionResult:
        cfg = self.config
        kw = dict(bits_per_key=cfg.bloom_bits_per_key, bloom_hashes=cfg.bloom_hashes, fsync=cfg.fsync)
        if self.layout == LAYOUT_ENCODED:
            res = compact(job, self._allocate, **kw)
        else:
            res = compact_naive(job, self._allocate, layout=LAYOUT_PLAIN, **kw)
        new_readers = [SctReader(d.path, stats=self._stats) for d in res.outputs]
        with self._cond:
            gone = {r.desc.sct_id for r in job.inputs}
            levels = [tuple(r for r in files if r.desc.sct_id not in gone) for files in self._version.levels]
            tgt = sorted(levels[job.target_level] + tuple(new_readers), key=lambda r: r.desc.min_key)
            levels[job.target_level] = tuple(tgt)
            for r in job.inputs:
                self._obsolete[r.desc.sct_id] = r
            self._install(levels)
            self._delete_unreferenced()
            self._stats.update(res.stats)
            self._stats[f"level{job.target_level}_rows_written"] += res.stats["compaction_rows_written"]
            self._cond.notify_all()
        return res

    def compact_once(self) -> bool:
        with self._lock:
            job = self._pick_job()
        if job is None:
            return False
        self.run_job(job)
        return True

    def compact_level(self, level: int) -> CompactionResult | None:
        """Merge every file of ``level`` into the overlapping files of the next level."""
        with self._lock:
            if level >= self.config.max_levels - 1 or not self._version.levels[level]:
                return None
            job = self._job_for(level, list(self._version.levels[level]))
        return self.run_job(job)

    def compact_all(self) -> None:
        """Push every level down until all data sits in one (the deepest used) level."""
        self.flush()
        self.wait_idle()
        with self._lock:
            self._busy = True
        try:
            while True:
                with self._lock:
                    used = [i for i, f in enumerate(self._version.levels) if f]
                    if not used or (len(used) == 1 and used[0] > 0):
                        return
                    top = used[0]
                if self.compact_level(top) is None:
                    return
        finally:
            with self._lock:
                self._busy = False

    # background -----------------------------------------------------------

    def _raise_worker_error(self) -> None:
        if self._worker_error is not None:
            raise EngineError("background worker failed") from self._worker_error

    def _background_loop(self) -> None:
        while True:
            with self._cond:
                while not self._closed and not self._immutables and \
                        (self._busy or not self.config.auto_compact or self._pick_job_peek() is None):
                    self._cond.wait(0.2)
                if self._closed and not self._immutables:
                    return
                mt = self._immutables[-1] if self._immutables else None
            try:
                if mt is not None:
                    self._flush_memtable(mt)
                elif self.config.auto_compact:
                    self.compact_once()
            except BaseException as exc:  # surfaced to writers
                log.exception("background work failed")
                with self._cond:
                    self._worker_error = exc
                    self._cond.notify_all()
                return

    def _pick_job_peek(self) -> bool | None:
        cfg = self.config
        levels = self._version.levels
        if len(levels[0]) >= cfg.l0_compaction_trigger:
            return True
        return True if any(self.level_bytes(l) > cfg.level_capacity(l)
                           for l in range(1, cfg.max_levels - 1)) else None

    def wait_idle(self, timeout: float = 600.0) -> None:
        """Block until pending flushes (and, with auto compaction, compactions) finish."""
        if not self.config.background:
            self._drain_sync()
            return
        deadline = time.perf_counter() + timeout
        with self._cond:
            while self._immutables or (self.config.auto_compact and self._pick_job_peek()):
                self._raise_worker_error()
                if time.perf_counter() > deadline:
                    raise TimeoutError("engine did not become idle")
                self._cond.wait(0.1)

    # introspection --------------------------------------------------------

    def levels(self) -> list[list[int]]:
        with self._lock:
            return [[r.desc.sct_id for r in files] for files in self._version.levels]

    def level_summary(self) -> list[dict]:
        with self._lock:
            return [{"level": i, "files": len(files),
                     "bytes": sum(r.desc.file_size_bytes for r in files),
                     "entries": sum(r.desc.entry_count for r in files)}
                    for i, files in enumerate(self._version.levels)]

    def file_ndvs(self) -> list[int]:
        """Dictionary size of every live encoded file."""
        with self._lock:
            return [r.desc.dictionary.m for files in self._version.levels for r in files
                    if r.desc.dictionary is not None]

    def total_sct_bytes(self) -> int:
        return sum(d["bytes"] for d in self.level_summary())

    def stats(self) -> dict[str, float]:
        with self._lock:
            out = dict(self._stats)
            out["last_seq"] = self._last_seq
            out["memtable_bytes"] = self._active.byte_size
            out["immutable_memtables"] = len(self._immutables)
            for d in self.level_summary():
                out[f"level{d['level']}_files"] = d["files"]
                out[f"level{d['level']}_bytes"] = d["bytes"]
            out["sct_bytes"] = self.total_sct_bytes()
            return out


"""Drives an engine with a generated workload and collects latency and engine metrics."""
from __future__ import annotations

import csv
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from ..config import EngineConfig
from ..costmodel import CostParams, i1_border
from ..engine import Engine
from .workload import Op, OpKind, Workload, WorkloadSpec

CSV_COLUMNS = ("bucket_start_ms", "op", "count", "p50_us", "p99_us", "throughput_ops_s")


@dataclass
class MetricsReport:
    """Per-bucket rows, a per-op summary and the engine stats at the end of the run."""

    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    stats: dict[str, float] = field(default_factory=dict)
    elapsed_s: float = 0.0

    @property
    def total_ops(self) -> int:
        return sum(r["count"] for r in self.summary)

    def op_count(self, op: str) -> int:
        return sum(r["count"] for r in self.summary if r["op"] == op)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            if not self.summary:
                return
            for r in self.rows + self.summary:
                w.writerow([r[c] for c in CSV_COLUMNS])
            w.writerow([])
            w.writerow(["stat", "value"])
            for k in sorted(self.stats):
                w.writerow([k, self.stats[k]])


class _Recorder:
    """Per-thread latency samples tagged with their start offset."""

    def __init__(self) -> None:
        self.samples: dict[str, list[tuple[float, float]]] = defaultdict(list)

    def add(self, op: str, start: float, seconds: float) -> None:
        self.samples[op].append((start, seconds))


def _aggregate(recorders: list[_Recorder], elapsed: float, bucket_ms: int) -> tuple[list[dict], list[dict]]:
    merged: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for rec in recorders:
        for op, s in rec.samples.items():
            merged[op].extend(s)
    rows, summary = [], []
    width = bucket_ms / 1000.0
    for op in sorted(merged):
        arr = np.array(merged[op])
        starts, lat = arr[:, 0], arr[:, 1] * 1e6
        bucket = (starts // width).astype(np.int64)
        for b in np.unique(bucket).tolist():
            sel = lat[bucket == b]
            rows.append({"bucket_start_ms": b * bucket_ms, "op": op, "count": len(sel),
                         "p50_us": round(float(np.percentile(sel, 50)), 3),
                         "p99_us": round(float(np.percentile(sel, 99)), 3),
                         "throughput_ops_s": round(len(sel) / width, 3)})
        summary.append({"bucket_start_ms": "total", "op": op, "count": len(lat),
                        "p50_us": round(float(np.percentile(lat, 50)), 3),
                        "p99_us": round(float(np.percentile(lat, 99)), 3),
                        "throughput_ops_s": round(len(lat) / elapsed, 3) if elapsed > 0 else 0.0})
    rows.sort(key=lambda r: (r["bucket_start_ms"], r["op"]))
    return rows, summary


def apply(engine: Engine, op: Op, stats: dict | None = None) -> object:
    if op.kind in (OpKind.INSERT, OpKind.UPDATE):
        return engine.put(op.key, op.value)
    if op.kind == OpKind.POINT_READ:
        return engine.get(op.key)
    if op.kind == OpKind.RANGE_READ:
        return engine.scan(op.key, op.key_high)
    res = engine.filter(op.predicate)
    if stats is not None:
        stats["filter_rows_returned"] = stats.get("filter_rows_returned", 0) + len(res)
    return res


def execute(engine: Engine, ops: Iterable[Op], *, threads: int = 1, duration_s: float | None = None,
            bucket_ms: int = 1000) -> MetricsReport:
    """Run ``ops`` on ``threads`` front workers, stopping early after ``duration_s`` if given."""
    it: Iterator[Op] = iter(ops)
    lock = threading.Lock()
    recorders = [_Recorder() for _ in range(max(1, threads))]
    extra: dict = {}
    errors: list[BaseException] = []
    t0 = time.perf_counter()
    deadline = None if duration_s is None else t0 + duration_s

    def worker(rec: _Recorder) -> None:
        while True:
            if deadline is not None and time.perf_counter() >= deadline:
                return
            with lock:
                op = next(it, None)
            if op is None:
                return
            s = time.perf_counter()
            try:
                apply(engine, op, extra)
            except BaseException as exc:
                errors.append(exc)
                return
            rec.add(op.kind.value, s - t0, time.perf_counter() - s)

    if len(recorders) == 1:
        worker(recorders[0])
    else:
        ts = [threading.Thread(target=worker, args=(r,)) for r in recorders]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
    if errors:
        raise errors[0]
    elapsed = time.perf_counter() - t0
    rows, summary = _aggregate(recorders, elapsed, bucket_ms)
    stats = engine.stats()
    stats.update(extra)
    return MetricsReport(rows, summary, stats, elapsed)


def annotate(report: MetricsReport, engine: Engine, spec: WorkloadSpec) -> None:
    """Add dictionary sizing and the model's break-even NDV to the stats block."""
    cfg = engine.config
    ndvs = engine.file_ndvs()
    params = CostParams(file_size=cfg.file_size, key_size=cfg.key_size, value_size=spec.value_size,
                        code_size=4, size_ratio=cfg.size_ratio)
    report.stats["model_ndv_border"] = i1_border(params)
    report.stats["mean_file_ndv"] = float(np.mean(ndvs)) if ndvs else 0.0
    report.stats["max_file_ndv"] = max(ndvs, default=0)


def load(spec: WorkloadSpec, engine: Engine, *, full_compact: bool = False, bucket_ms: int = 1000) -> MetricsReport:
    """Insert every key of the workload, then flush and let compaction settle."""
    w = Workload(spec)
    rep = execute(engine, w.load_ops(), bucket_ms=bucket_ms)
    t0 = time.perf_counter()
    if full_compact:
        engine.compact_all()
    else:
        engine.flush()
        engine.wait_idle()
    rep.stats = engine.stats()
    rep.stats["settle_seconds"] = time.perf_counter() - t0
    annotate(rep, engine, spec)
    return rep


def run(spec: WorkloadSpec, config: EngineConfig, path: str, *, count: int | None = None,
        duration_s: float | None = None, threads: int = 1, preload: bool = True,
        bucket_ms: int = 1000) -> MetricsReport:
    """Open an engine at ``path``, optionally load it, then run the mixed stream."""
    if count is None and duration_s is None:
        count = spec.n_ops
    with Engine.open(path, config) as engine:
        w = Workload(spec)
        if preload and not any(engine.levels()):
            load(spec, engine)
        if duration_s == 0 or count == 0:
            return MetricsReport(stats=engine.stats())
        rep = execute(engine, w.run_ops(count), threads=threads, duration_s=duration_s, bucket_ms=bucket_ms)
        annotate(rep, engine, spec)
        return rep

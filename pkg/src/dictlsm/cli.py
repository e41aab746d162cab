"""Command line: ``dictlsm-bench load|run|costmodel``."""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys

from .bench.harness import load, run
from .bench.workload import WorkloadSpec, parse_distribution, parse_mix
from .config import EngineConfig
from .costmodel import CostParams, border_fraction, i1_border, report
from .engine import Engine
from .errors import EngineError

_UNITS = {"": 1, "b": 1, "kb": 10**3, "mb": 10**6, "gb": 10**9, "kib": 2**10, "mib": 2**20, "gib": 2**30}


def parse_size(text: str) -> int:
    """``33554432``, ``32MiB`` or ``64MB``."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([a-zA-Z]*)\s*", text)
    if not m or m.group(2).lower() not in _UNITS:
        raise argparse.ArgumentTypeError(f"bad size {text!r}")
    return int(float(m.group(1)) * _UNITS[m.group(2).lower()])


def _workload_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dir", required=True, help="engine directory")
    p.add_argument("--entries", type=int, default=100_000, help="keys inserted by the load phase")
    p.add_argument("--value-size", type=int, default=64)
    p.add_argument("--ndv", type=float, default=0.01, help="distinct values as a fraction of entries")
    p.add_argument("--dist", default="uniform", help="uniform or zipf:<s>")
    p.add_argument("--mix", default="0:50:40:10:0", help="insert:update:point:range:filter weights")
    p.add_argument("--selectivity", type=float, default=0.01, help="target filter selectivity")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--file-size", type=parse_size, default=EngineConfig.file_size)
    p.add_argument("--ratio", type=int, default=10, help="size ratio between levels")
    p.add_argument("--mode", choices=("opd", "naive"), default="opd")
    p.add_argument("--memtable", type=parse_size, default=EngineConfig.memtable_capacity)
    p.add_argument("--background", action="store_true", help="flush and compact on a worker thread")
    p.add_argument("--no-fsync", action="store_true")
    p.add_argument("--csv", help="write metrics CSV here")


def _spec(a: argparse.Namespace, n_ops: int = 0) -> WorkloadSpec:
    return WorkloadSpec(n_entries=a.entries, value_size=a.value_size, ndv_fraction=a.ndv,
                        zipf_s=parse_distribution(a.dist), op_mix=parse_mix(a.mix),
                        selectivity=a.selectivity, seed=a.seed, n_ops=n_ops)


def _config(a: argparse.Namespace) -> EngineConfig:
    return EngineConfig(file_size=a.file_size, size_ratio=a.ratio, mode=a.mode,
                        memtable_capacity=a.memtable, background=a.background, fsync=not a.no_fsync)


def _print_report(rep, keys=("compaction_bytes_written", "compaction_seconds", "compactions",
                             "flush_bytes_written", "sct_bytes", "stall_seconds", "model_ndv_border",
                             "mean_file_ndv")) -> None:
    for r in rep.summary:
        print(f"{r['op']:<11} count={r['count']:<9} p50={r['p50_us']:.1f}us p99={r['p99_us']:.1f}us "
              f"throughput={r['throughput_ops_s']:.0f}/s")
    for k in keys:
        if k in rep.stats:
            print(f"{k:<26} {rep.stats[k]}")


def cmd_load(a: argparse.Namespace) -> int:
    spec = _spec(a)
    with Engine.open(a.dir, _config(a)) as eng:
        rep = load(spec, eng, full_compact=a.full_compact)
    _print_report(rep)
    if a.csv:
        rep.write_csv(a.csv)
    return 0


def cmd_run(a: argparse.Namespace) -> int:
    spec = _spec(a, a.ops or 0)
    rep = run(spec, _config(a), a.dir, count=a.ops, duration_s=a.duration, threads=a.threads)
    _print_report(rep)
    if a.csv:
        rep.write_csv(a.csv)
    return 0


def cmd_costmodel(a: argparse.Namespace) -> int:
    p = CostParams(n_entries=a.entries, file_size=a.file_size, size_ratio=a.ratio, ndv_per_file=a.ndv,
                   key_size=a.key_size, value_size=a.value_size, code_size=a.code_size,
                   selectivity=a.selectivity, heavy_ratio=a.heavy_ratio)
    rows = report(p)
    if a.json:
        print(json.dumps({"params": p.to_dict(), "schemes": rows, "ndv_border": i1_border(p),
                          "border_fraction": border_fraction(p)}, indent=2))
        return 0
    print(f"{'scheme':<7}{'files':>8}{'compaction_io':>18}{'compaction_cpu':>18}{'filter_io':>16}{'filter_cpu':>16}")
    for r in rows:
        print(f"{r['scheme']:<7}{r['files']:>8}{r['compaction_io']:>18.4g}{r['compaction_cpu']:>18.4g}"
              f"{r['filter_io']:>16.4g}{r['filter_cpu']:>16.4g}")
    print(f"ndv border per file: {i1_border(p)} ({border_fraction(p):.2%} of an encoded file's entries)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dictlsm-bench", description="Load, run and model the engine.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("load", help="insert --entries keys, then flush and compact")
    _workload_args(p)
    p.add_argument("--full-compact", action="store_true", help="merge everything into one level afterwards")
    p.set_defaults(func=cmd_load)
    p = sub.add_parser("run", help="run a mixed workload, loading first if the directory is empty")
    _workload_args(p)
    p.add_argument("--ops", type=int, help="number of operations")
    p.add_argument("--duration", type=float, help="seconds to run instead of --ops")
    p.add_argument("--threads", type=int, default=1, help="front worker threads")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("costmodel", help="print modelled compaction and filter costs")
    p.add_argument("--entries", type=int, default=2**24)
    p.add_argument("--file-size", type=parse_size, default=32 * 2**20)
    p.add_argument("--ratio", type=int, default=10)
    p.add_argument("--ndv", type=float, default=1e5, help="distinct values per file")
    p.add_argument("--key-size", type=int, default=16)
    p.add_argument("--value-size", type=int, default=64)
    p.add_argument("--code-size", type=int, default=4)
    p.add_argument("--selectivity", type=float, default=0.01)
    p.add_argument("--heavy-ratio", type=float, default=2.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_costmodel)
    return ap


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING)
    if a.command == "run" and a.ops is None and a.duration is None:
        a.ops = 10_000
    try:
        return a.func(a)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

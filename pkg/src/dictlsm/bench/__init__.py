"""Workload generation and the benchmark harness."""
from .harness import MetricsReport, execute, load, run
from .workload import Op, OpKind, Workload, WorkloadSpec, generate, parse_distribution, parse_mix

__all__ = ["MetricsReport", "Op", "OpKind", "Workload", "WorkloadSpec", "execute", "generate", "load",
           "parse_distribution", "parse_mix", "run"]

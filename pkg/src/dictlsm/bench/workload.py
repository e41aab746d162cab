"""Deterministic workload generation: value pools, skew, operation mixes, filter predicates."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from ..errors import InvalidSpec
from ..predicates import Range

OPS = ("insert", "update", "point_read", "range_read", "filter")
_ALPHABET = np.frombuffer(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz", np.uint8)
PREFIX_LEN = 8


class OpKind(Enum):
    INSERT = "insert"
    UPDATE = "update"
    POINT_READ = "point_read"
    RANGE_READ = "range_read"
    FILTER = "filter"


@dataclass(frozen=True)
class Op:
    kind: OpKind
    key: bytes = b""
    value: bytes | None = None
    key_high: bytes | None = None
    predicate: Range | None = None

    def to_bytes(self) -> bytes:
        parts = [self.kind.value.encode(), self.key, self.value or b"", self.key_high or b""]
        if self.predicate is not None:
            parts += [self.predicate.low, self.predicate.high]
        return b"".join(struct.pack("<I", len(x)) + x for x in parts)


@dataclass(frozen=True)
class WorkloadSpec:
    n_entries: int = 100_000
    key_size: int = 16
    value_size: int = 64
    ndv_fraction: float = 0.01
    zipf_s: float | None = None
    op_mix: tuple[float, float, float, float, float] = (1.0, 0.0, 0.0, 0.0, 0.0)
    range_span: int = 100
    selectivity: float = 0.01
    seed: int = 42
    n_ops: int = 0

    def __post_init__(self) -> None:
        if self.n_entries < 1:
            raise InvalidSpec("n_entries must be positive")
        if not 32 <= self.value_size <= 1024:
            raise InvalidSpec("value_size must be within 32..1024 bytes")
        if self.key_size < 8:
            raise InvalidSpec("key_size must be at least 8 bytes")
        if not 0 < self.ndv_fraction <= 1:
            raise InvalidSpec("ndv_fraction must be in (0, 1]")
        if self.zipf_s is not None and self.zipf_s < 0:
            raise InvalidSpec("zipf exponent must be non-negative")
        if len(self.op_mix) != 5 or min(self.op_mix) < 0 or abs(sum(self.op_mix) - 1) > 1e-9:
            raise InvalidSpec("op_mix needs five non-negative fractions summing to 1")
        if not 0 < self.selectivity <= 1:
            raise InvalidSpec("selectivity must be in (0, 1]")
        if self.range_span < 1 or self.n_ops < 0:
            raise InvalidSpec("range_span must be positive and n_ops non-negative")

    @property
    def ndv(self) -> int:
        return max(1, round(self.n_entries * self.ndv_fraction))

    @property
    def distribution(self) -> str:
        return "uniform" if self.zipf_s is None else f"zipf:{self.zipf_s:g}"


def parse_distribution(text: str) -> float | None:
    """``uniform`` gives None; ``zipf:<s>`` gives the exponent."""
    if text == "uniform":
        return None
    if text.startswith("zipf:"):
        try:
            s = float(text[5:])
        except ValueError as exc:
            raise InvalidSpec(f"bad zipf exponent in {text!r}") from exc
        if s < 0:
            raise InvalidSpec("zipf exponent must be non-negative")
        return s
    raise InvalidSpec(f"unknown distribution {text!r}")


def parse_mix(text: str) -> tuple[float, ...]:
    """Parse ``i:u:p:r:f`` weights (any scale) into fractions summing to 1."""
    try:
        w = [float(x) for x in text.split(":")]
    except ValueError as exc:
        raise InvalidSpec(f"bad mix {text!r}") from exc
    if len(w) != 5 or min(w) < 0 or sum(w) <= 0:
        raise InvalidSpec("mix needs five non-negative weights")
    total = sum(w)
    return tuple(x / total for x in w)


def make_key(index: int, key_size: int) -> bytes:
    return b"k" + str(index).zfill(key_size - 1).encode()


def value_pool(spec: WorkloadSpec, rng: np.random.Generator | None = None) -> list[bytes]:
    """Distinct values of exactly ``value_size`` bytes, sorted bytewise.

    Each value is a random 8-letter prefix followed by its zero-padded
    creation rank, so values are unique and have a stable total order.
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    n = spec.ndv
    digits = spec.value_size - PREFIX_LEN
    if len(str(n)) > digits:
        raise InvalidSpec("value_size too small for the pool")
    prefixes = _ALPHABET[rng.integers(0, len(_ALPHABET), size=(n, PREFIX_LEN))]
    pool = [prefixes[i].tobytes() + str(i).zfill(digits).encode() for i in range(n)]
    pool.sort()
    return pool


def value_weights(spec: WorkloadSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw probability of each pool position; ranks are scattered over the sorted pool."""
    n = spec.ndv
    if spec.zipf_s is None:
        return np.full(n, 1.0 / n)
    ranks = np.arange(1, n + 1, dtype=np.float64)
    p = ranks ** -spec.zipf_s
    p /= p.sum()
    out = np.empty(n)
    out[rng.permutation(n)] = p
    return out


class ValueSampler:
    def __init__(self, weights: np.ndarray, rng: np.random.Generator):
        self.cdf = np.cumsum(weights)
        self.cdf[-1] = 1.0
        self.rng = rng

    def draw(self, size: int) -> np.ndarray:
        return np.searchsorted(self.cdf, self.rng.random(size), side="right")


def range_for_selectivity(pool: list[bytes], weights: np.ndarray, target: float,
                          rng: np.random.Generator, tries: int = 64) -> tuple[Range, float]:
    """A half-open value range over the sorted pool whose probability mass is near ``target``."""
    n = len(pool)
    cdf = np.concatenate([[0.0], np.cumsum(weights)])
    best = None
    for _ in range(tries):
        start = int(rng.integers(0, n))
        end = int(np.searchsorted(cdf, cdf[start] + target, side="left"))
        end = min(max(end, start + 1), n)
        # the last value may overshoot; keep whichever end sits closer to the target
        if end - 1 > start and abs(cdf[end - 1] - cdf[start] - target) < abs(cdf[end] - cdf[start] - target):
            end -= 1
        mass = float(cdf[end] - cdf[start])
        err = abs(mass - target) / target
        if best is None or err < best[0]:
            best = (err, start, end, mass)
        if err <= 0.05:
            break
    _, start, end, mass = best
    high = pool[end] if end < n else b"\xff" * (len(pool[-1]) + 1)
    return Range(pool[start], high), mass


@dataclass
class Workload:
    """Materialized generator state: the pool, draw weights and seeded streams."""

    spec: WorkloadSpec
    pool: list[bytes] = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        rng = np.random.default_rng(self.spec.seed)
        self.pool = value_pool(self.spec, rng)
        self.weights = value_weights(self.spec, rng)

    def load_ops(self) -> Iterator[Op]:
        """Insert every key once, in a shuffled order."""
        spec = self.spec
        rng = np.random.default_rng([spec.seed, 1])
        order = rng.permutation(spec.n_entries)
        sampler = ValueSampler(self.weights, rng)
        batch = 65536
        for s in range(0, spec.n_entries, batch):
            idx = order[s:s + batch]
            vals = sampler.draw(len(idx))
            for k, v in zip(idx.tolist(), vals.tolist()):
                yield Op(OpKind.INSERT, make_key(k, spec.key_size), self.pool[v])

    def run_ops(self, count: int | None = None) -> Iterator[Op]:
        """Mixed operations after a load; infinite when ``count`` is None."""
        spec = self.spec
        rng = np.random.default_rng([spec.seed, 2])
        sampler = ValueSampler(self.weights, rng)
        cum = np.cumsum(spec.op_mix)
        cum[-1] = 1.0
        next_key = spec.n_entries
        emitted = 0
        while count is None or emitted < count:
            kind = OPS[int(np.searchsorted(cum, rng.random(), side="right"))]
            if kind == "insert":
                op = Op(OpKind.INSERT, make_key(next_key, spec.key_size), self.pool[int(sampler.draw(1)[0])])
                next_key += 1
            elif kind == "update":
                k = int(rng.integers(0, next_key))
                op = Op(OpKind.UPDATE, make_key(k, spec.key_size), self.pool[int(sampler.draw(1)[0])])
            elif kind == "point_read":
                op = Op(OpKind.POINT_READ, make_key(int(rng.integers(0, next_key)), spec.key_size))
            elif kind == "range_read":
                k = int(rng.integers(0, next_key))
                op = Op(OpKind.RANGE_READ, make_key(k, spec.key_size),
                        key_high=make_key(k + spec.range_span, spec.key_size))
            else:
                pred, _ = range_for_selectivity(self.pool, self.weights, spec.selectivity, rng)
                op = Op(OpKind.FILTER, predicate=pred)
            emitted += 1
            yield op


def generate(spec: WorkloadSpec) -> Iterator[Op]:
    """The full deterministic stream: the load phase, then ``spec.n_ops`` mixed operations."""
    w = Workload(spec)
    yield from w.load_ops()
    yield from w.run_ops(spec.n_ops)

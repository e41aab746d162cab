"""Value predicates understood by filters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import InvalidPredicate


@dataclass(frozen=True)
class Equality:
    value: bytes

    def matches(self, v: bytes) -> bool:
        return v == self.value


@dataclass(frozen=True)
class Prefix:
    prefix: bytes

    def matches(self, v: bytes) -> bool:
        return v.startswith(self.prefix)


@dataclass(frozen=True)
class Range:
    """Half-open value range ``low <= v < high``."""

    low: bytes
    high: bytes

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise InvalidPredicate(f"range low {self.low!r} > high {self.high!r}")

    def matches(self, v: bytes) -> bool:
        return self.low <= v < self.high


ValuePredicate = Union[Equality, Prefix, Range]


def prefix_successor(prefix: bytes) -> bytes | None:
    """Smallest byte string greater than every string starting with ``prefix``.

    Returns None when no such string exists (empty prefix or all 0xFF).
    """
    stripped = prefix.rstrip(b"\xff")
    if not stripped:
        return None
    return stripped[:-1] + bytes([stripped[-1] + 1])


def parse_predicate(text: str) -> ValuePredicate:
    """Parse ``eq:<v>``, ``prefix:<p>`` or ``range:<low>:<high>`` (UTF-8)."""
    kind, _, rest = text.partition(":")
    if kind == "eq":
        return Equality(rest.encode())
    if kind == "prefix":
        return Prefix(rest.encode())
    if kind == "range":
        low, sep, high = rest.partition(":")
        if not sep:
            raise InvalidPredicate(f"range needs low:high, got {rest!r}")
        return Range(low.encode(), high.encode())
    raise InvalidPredicate(f"unknown predicate kind {kind!r}")


def to_dict(p: ValuePredicate) -> dict:
    if isinstance(p, Equality):
        return {"kind": "eq", "value": p.value.hex()}
    if isinstance(p, Prefix):
        return {"kind": "prefix", "prefix": p.prefix.hex()}
    return {"kind": "range", "low": p.low.hex(), "high": p.high.hex()}

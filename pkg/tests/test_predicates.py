import pytest

from dictlsm.errors import InvalidPredicate
from dictlsm.predicates import Equality, Prefix, Range, parse_predicate, prefix_successor


def test_prefix_successor_carries_over_ff():
    assert prefix_successor(b"a") == b"b"
    assert prefix_successor(b"a\xff\xff") == b"b"
    assert prefix_successor(b"\xff\xff") is None
    assert prefix_successor(b"") is None


def test_range_is_half_open():
    r = Range(b"b", b"d")
    assert r.matches(b"b") and r.matches(b"cz") and not r.matches(b"d")


def test_range_rejects_inverted_bounds():
    with pytest.raises(InvalidPredicate):
        Range(b"z", b"a")


def test_parse():
    assert parse_predicate("eq:abc") == Equality(b"abc")
    assert parse_predicate("prefix:ab") == Prefix(b"ab")
    assert parse_predicate("range:a:c") == Range(b"a", b"c")
    with pytest.raises(InvalidPredicate):
        parse_predicate("range:a")
    with pytest.raises(InvalidPredicate):
        parse_predicate("like:a")

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dictlsm.dictionary import (OrderPreservingDictionary, build_counted, comparison_bound,
                                encode_many_counted, merge_dictionaries)
from dictlsm.errors import CodeOutOfRange, EmptyDomain, InvalidCode, NotInDomain
from dictlsm.predicates import Equality, Prefix, Range

D = OrderPreservingDictionary


def test_build_collapses_and_sorts():
    d = D.build([b"banana", b"apple", b"apple", b"cherry"])
    assert d.values == [b"apple", b"banana", b"cherry"]
    assert [d.encode(v) for v in d.values] == [0, 1, 2]


def test_single_value_width():
    d = D.build([b"x"])
    assert d.m == 1 and d.code_width_bits == 1


def test_empty_dictionary():
    d = D.build([])
    assert d.m == 0 and d.code_width_bits == 1
    with pytest.raises(EmptyDomain):
        D.build([], allow_empty=False)


def test_encode_decode_errors():
    d = D.build([b"apple", b"banana"])
    assert d.encode(b"apple") == 0
    with pytest.raises(NotInDomain):
        d.encode(b"zzz")
    with pytest.raises(CodeOutOfRange):
        d.decode(2)
    assert d.decode(0) == b"apple" and d.decode(d.m - 1) == b"banana"


def test_order_matches_string_order_on_sample():
    rng = random.Random(5)
    vals = [bytes(rng.randrange(256) for _ in range(rng.randint(0, 12))) for _ in range(10_000)]
    d = D.build(vals)
    codes = {v: d.encode(v) for v in set(vals)}
    sample = rng.sample(sorted(codes), 400)
    for a in sample:
        for b in sample[:50]:
            assert (a < b) == (codes[a] < codes[b])
    assert all(d.decode(d.encode(v)) == v for v in codes)


def test_code_range_examples():
    d = D.build([b"aa", b"ab", b"ba"])
    assert d.code_range_for_predicate(Prefix(b"a")) == (0, 2)
    assert d.code_range_for_predicate(Equality(b"ab")) == (1, 2)
    lo, hi = d.code_range_for_predicate(Equality(b"ac"))
    assert lo == hi
    assert d.code_range_for_predicate(Prefix(b"\xff")) == (3, 3)
    assert d.code_range_for_predicate(Prefix(b"")) == (0, 3)


_vals = st.lists(st.binary(max_size=6), max_size=60)


@settings(max_examples=300, deadline=None)
@given(_vals, st.binary(max_size=4), st.binary(max_size=4), st.sampled_from(["eq", "prefix", "range"]))
def test_code_range_equals_brute_force(values, a, b, kind):
    d = D.build(values)
    if kind == "eq":
        p = Equality(a)
    elif kind == "prefix":
        p = Prefix(a)
    else:
        p = Range(min(a, b), max(a, b))
    lo, hi = d.code_range_for_predicate(p)
    assert [lo <= c < hi for c in range(d.m)] == [p.matches(v) for v in d.values]


def test_merge_example():
    s1, s2 = D.build([b"a", b"c"]), D.build([b"b", b"c"])
    merged, table = merge_dictionaries([(1, s1), (2, s2)])
    assert merged.values == [b"a", b"b", b"c"]
    assert dict(table.items()) == {(0, 1): 0, (1, 1): 2, (0, 2): 1, (1, 2): 2}


def test_merge_single_source_is_identity():
    s = D.build([b"x", b"y", b"z"])
    merged, table = merge_dictionaries([(7, s)])
    assert merged == s
    assert all(old == new for (old, _), new in table.items())


def test_merge_restricted_to_used_codes():
    s1, s2 = D.build([b"a", b"c"]), D.build([b"b", b"c"])
    res = merge_dictionaries([(1, s1), (2, s2)], {1: np.array([0]), 2: np.array([0])})
    assert res.dictionary.values == [b"a", b"b"]
    with pytest.raises(InvalidCode):
        res.evtable.remap(1, np.array([1]))


def test_merge_rejects_bad_code():
    with pytest.raises(InvalidCode):
        merge_dictionaries([(1, D.build([b"a"]))], {1: np.array([3])})


@settings(max_examples=150, deadline=None)
@given(st.lists(st.lists(st.binary(min_size=1, max_size=4), max_size=40), min_size=1, max_size=6),
       st.integers(0, 2**31))
def test_merge_matches_decode_reencode_oracle(groups, seed):
    rng = random.Random(seed)
    sources = [(i + 10, D.build(g)) for i, g in enumerate(groups)]
    used = {sid: np.array(sorted(rng.sample(range(d.m), rng.randint(0, d.m))), dtype=np.int64)
            for sid, d in sources}
    res = merge_dictionaries(sources, used)
    # oracle: decode every used code, union, sort, re-encode
    expect = sorted({d.values[c] for sid, d in sources for c in used[sid].tolist()})
    assert res.dictionary.values == expect
    for sid, d in sources:
        for c in used[sid].tolist():
            assert res.dictionary.values[res.evtable[(c, sid)]] == d.values[c]
    # reverse index: each (code, source) under exactly one value
    pairs = [p for _, ps in res.reverse_index for p in ps]
    assert len(pairs) == len(set(pairs)) == sum(len(u) for u in used.values())
    assert res.comparisons <= comparison_bound(d.m for _, d in sources)


def test_counted_build_and_encode():
    vals = [b"d", b"b", b"a", b"c", b"b"]
    d, n_sort = build_counted(vals)
    assert d.values == [b"a", b"b", b"c", b"d"] and n_sort > 0
    codes, n_enc = encode_many_counted(d, vals)
    assert codes.tolist() == [3, 1, 0, 2, 1]
    # bisect over 4 values probes at most 3 times, plus one equality check
    assert len(vals) <= n_enc <= len(vals) * 4

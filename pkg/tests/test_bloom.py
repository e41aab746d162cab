import numpy as np

from dictlsm import bloom
from dictlsm.rows import key_dtype


def _keys(n, seed):
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 256, size=(n, 16), dtype=np.uint8)
    return [bytes(r) for r in raw]


def test_no_false_negatives():
    keys = _keys(2000, 1)
    arr = np.array(keys, dtype=key_dtype(16))
    bits = bloom.build(arr, 10, 7)
    assert all(bloom.may_contain(bits, k, 7, 16) for k in keys)


def test_keys_with_trailing_nul_bytes():
    keys = [bytes([i]) + b"\x00" * 15 for i in range(200)]
    bits = bloom.build(np.array(keys, dtype=key_dtype(16)), 10, 7)
    assert all(bloom.may_contain(bits, k, 7, 16) for k in keys)


def test_false_positive_rate_near_expected():
    keys = _keys(5000, 2)
    arr = np.array(keys, dtype=key_dtype(16))
    bits = bloom.build(arr, 10, 7)
    width = len(bits) * 8
    probes = _keys(20000, 3)
    fp = sum(bloom.may_contain(bits, k, 7, 16) for k in probes) / len(probes)
    expected = bloom.expected_fpr(5000, width, 7)
    # binomial 3-sigma band around the analytic rate
    sigma = (expected * (1 - expected) / len(probes)) ** 0.5
    assert abs(fp - expected) <= 3 * sigma + 0.002


def test_filter_size_floor():
    assert bloom.filter_bits(1, 10) == 64
    assert bloom.filter_bits(100, 10) == 1000

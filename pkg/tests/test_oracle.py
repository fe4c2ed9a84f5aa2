import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wstack.oracle import IndexMultiset, OracleParams, hors, omega

wide = st.binary(min_size=64, max_size=64)


def bit_slice(digest: bytes, w: int, kappa: int) -> list[int]:
    # reference: walk a string of '0'/'1' characters
    bits = "".join(f"{byte:08b}" for byte in digest)
    b = w.bit_length() - 1
    return [int(bits[i * b:(i + 1) * b], 2) for i in range(kappa)]


def test_params_validation():
    with pytest.raises(ValueError):
        OracleParams(12, 3)
    with pytest.raises(ValueError):
        OracleParams(8, 0)
    with pytest.raises(ValueError):
        OracleParams(4096, 43)  # 516 bits
    assert OracleParams(4096, 42).bits_used == 504
    assert OracleParams(4096, 31).bits_used == 372


def test_all_zero_input():
    m = hors(bytes(64), OracleParams(4096, 31))
    assert m.counts == {0: 31}
    assert omega(bytes(64), 0, OracleParams(8, 3)) == 3
    assert all(omega(bytes(64), k, OracleParams(8, 3)) == 0 for k in range(1, 8))


def test_known_slicing():
    d = bytes([0b10110011, 0b01011111]) + bytes(62)
    assert hors(d, OracleParams(8, 3)).indices == (0b101, 0b100, 0b110)


@given(wide, st.sampled_from([(8, 3), (64, 4), (4096, 31), (2, 512), (65536, 32)]))
def test_matches_bit_slicing_reference(d, wk):
    w, kappa = wk
    m = hors(d, OracleParams(w, kappa))
    assert list(m.indices) == bit_slice(d, w, kappa)


@given(wide, st.sampled_from([(8, 3), (64, 4), (4096, 31)]))
def test_multiplicities_match_index_slices(d, wk):
    p = OracleParams(*wk)
    m = hors(d, p)
    assert sum(m.counts.values()) == p.kappa == m.cardinality
    assert all(0 <= k < p.w for k in m.support)
    assert len(m.support) <= p.kappa
    assert [omega(d, k, p) for k in range(p.w)] == [m.count(k) for k in range(p.w)]


def test_omega_out_of_range():
    with pytest.raises(IndexError):
        omega(bytes(64), 8, OracleParams(8, 3))


def test_multiset_equality_ignores_order():
    assert IndexMultiset((1, 2, 2)) == IndexMultiset((2, 1, 2))
    assert IndexMultiset((1, 2, 2)) != IndexMultiset((1, 1, 2))


def test_distribution_is_binomial():
    rng = random.Random(7)
    p = OracleParams(64, 4)
    n = 10_000
    totals = np.zeros(64)
    for _ in range(n):
        for k, c in hors(rng.randbytes(64), p).counts.items():
            totals[k] += c
    mean = n * p.kappa / p.w
    sd = np.sqrt(n * p.kappa * (1 / p.w) * (1 - 1 / p.w))
    assert np.all(np.abs(totals - mean) < 5 * sd)

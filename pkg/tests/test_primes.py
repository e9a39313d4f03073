import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from zetauniv.errors import FeasibilityExceeded
from zetauniv.primes import (
    alternating_prime_sum,
    alternating_tail_bound,
    gap_statistic,
    iter_prime_segments,
    pnt_window_sum,
    prime_count,
    stream_primes,
    write_index_csv,
)


def test_first_primes_and_indices():
    s = stream_primes(2, 11)
    assert s.primes.tolist() == [2, 3, 5, 7]
    assert s.indices.tolist() == [1, 2, 3, 4]
    # p_1 = 2 has odd index, so its sign is -1
    assert s.signs.tolist() == [-1, 1, -1, 1]


def test_prime_count_matches_known_values():
    assert prime_count(10**6) == 78498
    assert prime_count(100) == 25


@pytest.mark.parametrize("lo,hi", [(2, 3000), (101, 5000), (7919, 20000), (999_983, 1_000_500)])
def test_stream_matches_sympy(lo, hi):
    s = stream_primes(lo, hi, segment_len=512)
    ref = list(sympy.primerange(lo, hi))
    assert s.primes.tolist() == ref
    assert s.indices[0] == sympy.primepi(ref[0])


def test_indices_survive_small_segments():
    # many tiny segments must give the same index sequence as one big one
    a = stream_primes(1000, 30000, segment_len=64)
    b = stream_primes(1000, 30000)
    assert np.array_equal(a.primes, b.primes)
    assert np.array_equal(a.indices, b.indices)
    assert int(b.indices[0]) == 169  # pi(997) = 168


def test_offset_segment_index():
    s = stream_primes(101, 110)
    assert s.primes[0] == 101 and s.indices[0] == 26


def test_segments_are_contiguous():
    segs = list(iter_prime_segments(2, 50000, segment_len=1000))
    idx = np.concatenate([s.indices for s in segs])
    assert np.array_equal(idx, np.arange(1, len(idx) + 1))


def test_feasibility_guard():
    with pytest.raises(FeasibilityExceeded):
        list(iter_prime_segments(2, 1e12, max_primes=10**6))
    with pytest.raises(FeasibilityExceeded):
        pnt_window_sum(0.01, 1.0, 2.0, max_primes=10**7)


def test_pnt_window_sum_against_direct():
    ps = np.array(list(sympy.primerange(2, int(math.exp(2 / 0.25)) + 1)), dtype=float)
    lp = 0.25 * np.log(ps)
    keep = (lp >= 1) & (lp <= 2)
    assert pnt_window_sum(0.25, 1.0, 2.0) == pytest.approx(np.sum(lp[keep] / ps[keep]), rel=1e-12)


def test_pnt_window_sum_degenerate():
    assert pnt_window_sum(0.1, 1.5, 1.5) == 0.0
    with pytest.raises(ValueError):
        pnt_window_sum(0.1, 2.0, 1.0)


def test_alternating_sum_direct():
    ps = list(sympy.primerange(30, 2000))
    n0 = sympy.primepi(29) + 1
    s = 1.2 + 3j
    ref = sum((-1) ** (n0 + k) * complex(p) ** (-s) for k, p in enumerate(ps))
    got = alternating_prime_sum(s, 30, 2000)
    assert abs(got.value - ref) < 1e-13
    assert got.partial_sup >= abs(got.value)


def test_alternating_sum_rejects_left_half():
    with pytest.raises(ValueError):
        alternating_prime_sum(0.7, 10, 100)


@settings(max_examples=25, deadline=None)
@given(sigma=st.floats(0.75, 2.0), t=st.floats(-30, 30), P=st.integers(20, 3000))
def test_pairing_tail_bound_dominates(sigma, t, P):
    z = complex(sigma, t)
    far = alternating_prime_sum(z, P, 60000)
    # any finite piece of the tail obeys the same bound
    assert far.partial_sup <= alternating_tail_bound(z, P) * (1 + 1e-12)


def test_gap_statistic_small_range():
    stat, p = gap_statistic(100, 200)
    ps = list(sympy.primerange(100, 220))
    best = max((b - a) * math.log(a) ** 2 / a for a, b in zip(ps, ps[1:]) if a < 200)
    assert stat == pytest.approx(best)
    assert p in ps


def test_index_csv(tmp_path):
    path = tmp_path / "idx.csv"
    assert write_index_csv(path, 10, 30) == 6
    lines = path.read_text().splitlines()
    assert lines[0] == "p,n" and lines[1] == "11,5"

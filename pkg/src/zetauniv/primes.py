"""Segmented prime sieve with exact global indexing, plus the weighted prime
sums used by the Euler-product construction.

Primes are numbered from 1 (p_1 = 2), so the parity sign is (-1)**n with
p_1 = 2 receiving -1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import FeasibilityExceeded

DEFAULT_SEGMENT_LEN = 2**20
DEFAULT_MAX_PRIMES = 10**8


@dataclass(frozen=True)
class PrimeStream:
    segment_lo: int
    segment_hi: int
    primes: np.ndarray
    global_index_offset: int

    @property
    def indices(self) -> np.ndarray:
        return self.global_index_offset + np.arange(len(self.primes), dtype=np.int64)

    @property
    def signs(self) -> np.ndarray:
        """(-1)**n for every prime in the stream."""
        return np.where(self.indices % 2 == 0, 1.0, -1.0)

    def __len__(self):
        return len(self.primes)


def prime_count_upper(x: float) -> float:
    """Rosser-Schoenfeld bound pi(x) < 1.25506 x / log x (x > 1)."""
    if x < 17:
        return 7.0
    return 1.25506 * x / math.log(x)


def check_feasible(hi: float, max_primes: int = DEFAULT_MAX_PRIMES) -> None:
    if not math.isfinite(hi):
        raise FeasibilityExceeded(f"range end {hi} is not finite")
    est = prime_count_upper(hi)
    if est > max_primes:
        raise FeasibilityExceeded(
            f"sieving to {hi:.6g} needs about {est:.3g} primes, above max_primes={max_primes}"
        )


def small_primes(limit: int) -> np.ndarray:
    """All primes <= limit by a plain Eratosthenes sieve."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(limit) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.nonzero(sieve)[0].astype(np.int64)


def _sieve_block(lo: int, hi: int, base: np.ndarray) -> np.ndarray:
    """Primes in [lo, hi) given all primes up to sqrt(hi)."""
    out = []
    if lo <= 2 < hi:
        out.append(np.array([2], dtype=np.int64))
    start = max(lo, 3) | 1
    if start >= hi:
        return out[0] if out else np.zeros(0, dtype=np.int64)
    count = (hi - start + 1) // 2
    mark = np.ones(count, dtype=bool)
    for p in base:
        p = int(p)
        if p == 2:
            continue
        pp = p * p
        if pp >= hi:
            break
        first = max(pp, ((start + p - 1) // p) * p)
        if first % 2 == 0:
            first += p
        mark[(first - start) // 2 :: p] = False
    out.append(start + 2 * np.nonzero(mark)[0].astype(np.int64))
    return np.concatenate(out) if len(out) > 1 else out[0]


def iter_prime_segments(
    lo: int,
    hi: int,
    segment_len: int = DEFAULT_SEGMENT_LEN,
    max_primes: int = DEFAULT_MAX_PRIMES,
) -> Iterator[PrimeStream]:
    """Yield consecutive PrimeStream segments covering [lo, hi).

    Indices are exact: primes below ``lo`` are sieved and counted (never
    estimated) so the parity of every emitted prime is correct.
    """
    lo = max(int(lo), 2)
    hi = int(math.ceil(hi))
    if hi <= lo:
        return
    check_feasible(hi, max_primes)
    base = small_primes(math.isqrt(hi) + 1)
    span = 2 * int(segment_len)
    count = 0
    a = 2
    while a < hi:
        b = min(a + span, hi)
        if b <= lo:
            # counting only
            count += len(_sieve_block(a, b, base))
            a = b
            continue
        block = _sieve_block(a, b, base)
        if a < lo:
            below = int(np.searchsorted(block, lo))
            count += below
            block = block[below:]
            seg_lo = lo
        else:
            seg_lo = a
        yield PrimeStream(seg_lo, b, block, count + 1)
        count += len(block)
        a = b


def stream_primes(
    lo: int,
    hi: int,
    segment_len: int = DEFAULT_SEGMENT_LEN,
    max_primes: int = DEFAULT_MAX_PRIMES,
) -> PrimeStream:
    """All primes in [lo, hi) with their global indices, as one stream."""
    lo = max(int(lo), 2)
    if hi <= lo:
        raise ValueError(f"need 2 <= lo < hi, got lo={lo}, hi={hi}")
    parts = list(iter_prime_segments(lo, hi, segment_len, max_primes))
    if not parts:
        return PrimeStream(lo, int(hi), np.zeros(0, dtype=np.int64), 1)
    primes = np.concatenate([s.primes for s in parts])
    return PrimeStream(lo, int(math.ceil(hi)), primes, parts[0].global_index_offset)


def prime_count(x: float, **kw) -> int:
    """Exact pi(x - 1), the number of primes below x."""
    return sum(len(s) for s in iter_prime_segments(2, x, **kw))


def pnt_window_sum(
    delta: float,
    x: float,
    y: float,
    segment_len: int = DEFAULT_SEGMENT_LEN,
    max_primes: int = DEFAULT_MAX_PRIMES,
) -> float:
    """Sum of delta*log(p)/p over primes with x <= delta*log(p) <= y."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if x > y:
        raise ValueError("need x <= y")
    if x == y:
        return 0.0
    lo = max(2, int(math.floor(math.exp(x / delta))) - 1)
    hi = math.exp(y / delta)
    check_feasible(hi, max_primes)
    total = 0.0
    for seg in iter_prime_segments(lo, int(hi) + 2, segment_len, max_primes):
        lp = delta * np.log(seg.primes.astype(np.float64))
        keep = (lp >= x) & (lp <= y)
        total += float(np.sum(lp[keep] / seg.primes[keep]))
    return total


@dataclass(frozen=True)
class AlternatingSum:
    value: np.ndarray | complex
    partial_sup: np.ndarray | float


def alternating_prime_sum(
    s,
    N: float,
    M: float,
    segment_len: int = DEFAULT_SEGMENT_LEN,
    max_primes: int = DEFAULT_MAX_PRIMES,
) -> AlternatingSum:
    """Sum of (-1)**n p_n**(-s) over N <= p_n < M.

    Also returns the largest modulus reached by any intermediate partial sum.
    ``s`` may be a scalar or a 1-d array of exponents.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(s.real < 0.75):
        raise ValueError("alternating_prime_sum needs Re(s) >= 3/4")
    if N > M:
        raise ValueError("need N <= M")
    total = np.zeros(len(s), dtype=complex)
    sup = np.zeros(len(s))
    if N < M:
        for seg in iter_prime_segments(max(2, int(math.ceil(N))), M, segment_len, max_primes):
            if len(seg) == 0:
                continue
            logp = np.log(seg.primes.astype(np.float64))
            terms = seg.signs[None, :] * np.exp(-s[:, None] * logp[None, :])
            partial = total[:, None] + np.cumsum(terms, axis=1)
            sup = np.maximum(sup, np.abs(partial).max(axis=1))
            total = partial[:, -1]
    if scalar:
        return AlternatingSum(complex(total[0]), float(sup[0]))
    return AlternatingSum(total, sup)


def alternating_tail_bound(z, P: float):
    """Certified bound on |sum_{n >= m} (-1)**n p_n**(-z)| for any p_m >= P.

    Pairing consecutive terms gives |p**-z - q**-z| <= |z| * int_p^q x**(-sigma-1) dx,
    so the whole tail is at most |z| P**(-sigma) / sigma; one unpaired term adds
    P**(-sigma). Valid for any sigma > 0.
    """
    z = np.asarray(z, dtype=complex)
    sigma = z.real
    return (1.0 + np.abs(z) / sigma) * np.power(float(P), -sigma)


def gap_statistic(lo: int, hi: int, **kw) -> tuple[float, int]:
    """max over p_n in [lo, hi) of (p_{n+1} - p_n) (log p_n)**2 / p_n, and the p_n attaining it."""
    best, arg = 0.0, 0
    prev = None
    # overshoot so the last prime below hi has a successor
    for seg in iter_prime_segments(lo, int(hi) + 2000, **kw):
        p = seg.primes
        if prev is not None:
            p = np.concatenate([[prev], p])
        if len(p) >= 2:
            a, b = p[:-1], p[1:]
            keep = a < hi
            if np.any(keep):
                a, b = a[keep].astype(np.float64), b[keep].astype(np.float64)
                stat = (b - a) * np.log(a) ** 2 / a
                k = int(np.argmax(stat))
                if stat[k] > best:
                    best, arg = float(stat[k]), int(a[k])
        prev = int(seg.primes[-1]) if len(seg) else prev
    return best, arg


def write_index_csv(path, lo: int, hi: int, **kw) -> int:
    """Debug dump of (p_n, n) pairs; returns the number of rows."""
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "n"])
        for seg in iter_prime_segments(lo, hi, **kw):
            for p, n in zip(seg.primes.tolist(), seg.indices.tolist()):
                w.writerow([p, n])
                rows += 1
    return rows

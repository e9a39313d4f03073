"""Twisted Euler products h(s) = -sum_p log(1 - a_p p^-s) with |a_p| = 1.

The primes split into four ranges by the thresholds P0 <= P1 <= P2 <= P3:

* p < P1: the head. Below P0 the coefficients alternate with the prime index;
  from P0 on they are steered greedily so that -sum log(1 - a_p/p) lands on C.
* P1 <= p < P2 and p >= P3: a_p = (-1)^n, whose sums are tiny by pairing.
* P2 <= p < P3: the kernel range, where consecutive pairs average to
  x_n = delta log p_n g(delta log p_n), so the prime sum imitates
  int_A^B g(x) e^{-sx} dx.

Nothing here stores the primes of the kernel range. ``CoefficientTable``
produces phases segment by segment from the sieve and ``scan_table``
accumulates every sum the verifier needs in one pass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numba
import numpy as np

from .errors import (
    HeadSteeringFailed,
    KernelBoundViolated,
    SmoothingBudgetExceeded,
    TailNotCertified,
    ThresholdOrderViolated,
)
from .kernel import BOUND_SLACK, KernelTable
from .primes import (
    DEFAULT_MAX_PRIMES,
    DEFAULT_SEGMENT_LEN,
    alternating_tail_bound,
    check_feasible,
    iter_prime_segments,
    small_primes,
)
from .regions import CompactRegion

TWO_PI = 2.0 * math.pi
RULES = ("apdef", "recursive", "uniform")


# ---------------------------------------------------------------------------
# smoothing


def smooth_kernel(kt: KernelTable, width: float, K: CompactRegion | None = None,
                  epsilon: float | None = None) -> KernelTable:
    """Hann-window average of u(x) = x g(x) over ``width`` (in x units).

    Averaging u rather than g keeps |x g~(x)| <= 1, because each smoothed value
    is a convex combination of old ones. The ends are padded with their edge
    values. If K and epsilon are given, the change in the Laplace transform on
    K must stay below epsilon/7.
    """
    if width < 0:
        raise ValueError("smoothing width must be non-negative")
    if kt.max_scaled > 1 + BOUND_SLACK:
        raise KernelBoundViolated(f"input kernel has max |x g(x)| = {kt.max_scaled:.6g} > 1")
    m = int(round(0.5 * width / kt.grid_step))
    u = kt.u
    if m == 0:
        new_u = u.copy()
        c1 = float(np.max(np.abs(np.diff(u, 2)))) if kt.n >= 3 else 0.0
    else:
        phi = np.hanning(2 * m + 3)[1:-1]
        phi /= phi.sum()
        padded = np.concatenate([np.full(m, u[0]), u, np.full(m, u[-1])])
        new_u = np.convolve(padded, phi, mode="valid")
        # second differences of u~ are u convolved with second differences of phi
        c1 = float(np.max(np.abs(u))) * float(np.sum(np.abs(np.diff(np.concatenate([[0.0], phi, [0.0]]), 2))))
        c1 = max(c1, float(np.max(np.abs(np.diff(new_u, 2)))))
    new_u = _clip_to_disk(new_u)
    slack = None
    if K is not None:
        z = K.samples
        tmp = KernelTable(kt.A, kt.B, new_u / kt.xs, smoothed=True)
        slack = float(np.max(np.abs(tmp.transform(z) - kt.transform(z))))
        if epsilon is not None and slack >= epsilon / 7:
            raise SmoothingBudgetExceeded(
                f"smoothing width {width} moves the transform by {slack:.3g} >= epsilon/7")
    return KernelTable(kt.A, kt.B, new_u / kt.xs, smoothed=True, bounded=True,
                       c1_bound=c1, smoothing_slack=slack)


def _clip_to_disk(u):
    # only rounding can push a convex combination past the unit circle
    r = np.abs(u)
    return np.where(r > 1.0, u / np.maximum(r, 1.0), u)


# ---------------------------------------------------------------------------
# certificates used to place P0


def quadratic_tail_sum(P: float, sigma: float, explicit_to: float | None = None) -> float:
    """Upper bound for sum_{p >= P} (-log(1 - p^-sigma) - p^-sigma).

    This is the worst case over |a_p| = 1 of |log(1 - a_p p^-s) + a_p p^-s|
    when Re(s) >= sigma. Primes below ``explicit_to`` are summed; the rest is
    bounded by the integral of (x^-2sigma / 2) / (1 - x^-sigma) from Q - 1.
    """
    if sigma <= 0.5:
        return math.inf
    Q = float(P) if explicit_to is None else max(float(P), float(explicit_to))
    total = 0.0
    if Q > P:
        ps = small_primes(int(Q) - 1)
        ps = ps[ps >= P].astype(np.float64)
        r = ps ** (-sigma)
        total = float(np.sum(-np.log1p(-r) - r))
    return total + _quadratic_integral_tail(Q, sigma)


def _quadratic_integral_tail(Q: float, sigma: float) -> float:
    y = max(Q - 1.0, 2.0)
    return y ** (1 - 2 * sigma) / (2 * (2 * sigma - 1) * (1 - y ** (-sigma)))


def choose_P0(zs: np.ndarray, epsilon: float, explicit_to: int = 2**22) -> int:
    """Smallest prime with both the quadratic-tail and the pairing certificates below epsilon/7."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    sigma = float(np.min(zs.real))
    budget = epsilon / 7
    Q = explicit_to
    while True:
        check_feasible(Q)
        ps = small_primes(Q - 1)
        r = ps.astype(np.float64) ** (-sigma)
        q = -np.log1p(-r) - r
        W = np.cumsum(q[::-1])[::-1] + _quadratic_integral_tail(Q, sigma)
        pair = np.max((1 + np.abs(zs[:, None]) / zs.real[:, None])
                      * ps[None, :].astype(np.float64) ** (-zs.real[:, None]), axis=0)
        ok = np.nonzero((W < budget) & (pair < budget))[0]
        if len(ok):
            return int(ps[ok[0]])
        Q *= 4


# ---------------------------------------------------------------------------
# thresholds and head steering


@dataclass(frozen=True, eq=False)
class ThresholdSet:
    delta: float
    A: float
    B: float
    C: complex
    P0: float
    P1: float
    P2: float
    P3: float
    epsilon: float | None = None
    head_primes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    head_phases: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not 0 < self.A < self.B:
            raise ValueError("need 0 < A < B")
        if self.P2 != math.exp(self.A / self.delta) or self.P3 != math.exp(self.B / self.delta):
            raise ValueError("P2 and P3 must equal exp(A/delta) and exp(B/delta)")
        if not self.P0 <= self.P1 <= self.P2 <= self.P3:
            raise ThresholdOrderViolated(
                f"thresholds out of order: P0={self.P0}, P1={self.P1}, P2={self.P2:.6g}, P3={self.P3:.6g}")

    def as_dict(self) -> dict:
        return {"delta": self.delta, "A": self.A, "B": self.B, "C": complex(self.C),
                "P0": self.P0, "P1": self.P1, "P2": self.P2, "P3": self.P3}


def parity_phase(n):
    """Phase of (-1)^n: 0 for even n, pi for odd n."""
    return np.where(np.asarray(n) % 2 == 0, 0.0, math.pi)


def head_log_sum(primes, phases) -> complex:
    """sum over the given primes of log(1 - a_p/p)."""
    a = np.exp(1j * np.asarray(phases, dtype=np.float64))
    return complex(np.sum(np.log1p(-a / np.asarray(primes, dtype=np.float64))))


def steer_head_coefficients(P0: float, target: complex, epsilon: float,
                            pmax: float = 1e7) -> tuple[np.ndarray, np.ndarray, int]:
    """Greedy head phases so that |sum_{p < P1} log(1 - a_p/p) + target| < epsilon/7.

    Primes below P0 alternate. From P0 on, while the residual r = S + target is
    too large, a_p = r/|r| is used: the new term log(1 - a_p/p) ~ -r/(|r| p)
    points straight back towards zero. Returns (primes, phases, P1) where P1 is
    the first prime at which the residual is already within budget.
    """
    budget = epsilon / 7
    C = complex(target)
    ps = small_primes(int(pmax))
    idx = np.arange(1, len(ps) + 1)
    below = ps < P0
    phases = np.zeros(len(ps))
    phases[below] = parity_phase(idx[below])
    S = head_log_sum(ps[below], phases[below])
    k = int(np.count_nonzero(below))
    reach = float(np.sum(1.0 / ps[k:]))
    if abs(S + C) >= budget and reach <= abs(S + C):
        raise HeadSteeringFailed(
            f"sum of 1/p over [{P0}, {pmax:.3g}] is {reach:.4g}, not enough to reach |C|={abs(C):.4g}")
    while k < len(ps):
        r = S + C
        if abs(r) < budget:
            break
        phase = math.atan2(r.imag, r.real) % TWO_PI
        phases[k] = phase
        S += complex(np.log1p(-complex(math.cos(phase), math.sin(phase)) / ps[k]))
        k += 1
    else:
        raise HeadSteeringFailed(f"steering did not reach the target below pmax={pmax:.3g}")
    return ps[:k], phases[:k], int(ps[k])


def choose_thresholds(delta: float, A: float, B: float, C: complex, epsilon: float,
                      K: CompactRegion, max_primes: int = DEFAULT_MAX_PRIMES,
                      pmax: float = 1e7) -> ThresholdSet:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    zs = K.scaled(delta)
    if np.min(zs.real) < 0.75:
        raise ValueError("need Re(1 + delta s) >= 3/4 on K")
    P2, P3 = math.exp(A / delta), math.exp(B / delta)
    check_feasible(P3, max_primes)
    P0 = choose_P0(zs, epsilon)
    hp, hph, P1 = steer_head_coefficients(P0, C, epsilon, pmax=min(pmax, P2 + 1))
    if P1 > P2:
        raise ThresholdOrderViolated(f"P1={P1} exceeds P2={P2:.6g}; decrease delta")
    return ThresholdSet(delta, A, B, complex(C), float(P0), float(P1), P2, P3, epsilon, hp, hph)


# ---------------------------------------------------------------------------
# coefficient tables


def apdef_phase(x, n):
    """xi + (-1)^n theta with theta = arccos|x|, xi = arg x (0 when x = 0), mod 2 pi."""
    x = np.asarray(x, dtype=complex)
    r = np.abs(x)
    if np.any(r > 1 + BOUND_SLACK):
        raise KernelBoundViolated(f"|x_n| = {float(np.max(r)):.15g} exceeds 1")
    theta = np.arccos(np.minimum(r, 1.0))
    xi = np.where(r == 0, 0.0, np.angle(x))
    sign = np.where(np.asarray(n) % 2 == 0, 1.0, -1.0)
    return np.mod(xi + sign * theta, TWO_PI)


@numba.njit(cache=True)
def _greedy_phases(inv_p, integral_re, integral_im, carry_re, carry_im):
    n = inv_p.shape[0]
    out = np.empty(n)
    for k in range(n):
        dr = integral_re[k] - carry_re
        di = integral_im[k] - carry_im
        if dr == 0.0 and di == 0.0:
            ph = 0.0
        else:
            ph = math.atan2(di, dr)
            if ph < 0.0:
                ph += 2.0 * math.pi
        out[k] = ph
        carry_re += math.cos(ph) * inv_p[k]
        carry_im += math.sin(ph) * inv_p[k]
    return out, carry_re, carry_im


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Phases of a_p for every prime; the kernel range is generated on demand.

    ``tail_rule`` is "parity" except for the uniform table, where every a_p
    (including those beyond the cutoff) equals exp(i * uniform_phase).
    """

    rule: str
    delta: float
    P0: float
    P1: float
    P2: float
    P3: float
    kernel: KernelTable | None = None
    head_primes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    head_phases: np.ndarray = field(default_factory=lambda: np.zeros(0))
    uniform_phase: float = 0.0
    thresholds: ThresholdSet | None = None
    segment_len: int = DEFAULT_SEGMENT_LEN
    max_primes: int = DEFAULT_MAX_PRIMES

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown coefficient rule {self.rule!r}")
        if self.rule != "uniform":
            if self.kernel is None:
                raise ValueError("kernel rules need a kernel table")
            if self.kernel.max_scaled > 1 + BOUND_SLACK:
                raise KernelBoundViolated(
                    f"kernel has max |x g(x)| = {self.kernel.max_scaled:.15g} > 1")

    @property
    def tail_rule(self) -> str:
        return "uniform" if self.rule == "uniform" else "parity"

    @property
    def markers(self) -> tuple:
        return (self.P0, self.P1, self.P2, self.P3)

    @classmethod
    def uniform(cls, cutoff: float, phase: float = 0.0, **kw) -> "CoefficientTable":
        """All a_p = exp(i phase); with phase 0 this is the Euler product of zeta."""
        c = float(cutoff)
        return cls("uniform", 1.0, c, c, c, c, uniform_phase=float(phase) % TWO_PI, **kw)

    def region_of(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        if self.rule == "uniform":
            return np.full(p.shape, "uniform", dtype=object)
        out = np.full(p.shape, "parity", dtype=object)
        out[p < self.P0] = "head"
        out[(p >= self.P0) & (p < self.P1)] = "steered"
        out[(p >= self.P2) & (p < self.P3)] = "kernel"
        out[p >= self.P3] = "tail"
        return out

    def x_values(self, p) -> np.ndarray:
        """x_n = delta log p g(delta log p), i.e. the interpolated u at delta log p."""
        x = self.delta * np.log(np.asarray(p, dtype=np.float64))
        return self.kernel.scaled_value(np.clip(x, self.kernel.A, self.kernel.B))

    def _direct_phases(self, p, n):
        """Phases for every rule except the kernel range of the recursive rule."""
        p = np.asarray(p)
        n = np.asarray(n)
        if self.rule == "uniform":
            return np.full(p.shape, self.uniform_phase)
        ph = parity_phase(n).astype(np.float64)
        head = p < self.P1
        if np.any(head):
            j = np.searchsorted(self.head_primes, p[head])
            if np.any(j >= len(self.head_primes)) or np.any(self.head_primes[np.minimum(j, len(self.head_primes) - 1)] != p[head]):
                raise ValueError("head primes missing from the coefficient table")
            ph[head] = self.head_phases[j]
        ker = (p >= self.P2) & (p < self.P3)
        if np.any(ker) and self.rule == "apdef":
            ph[ker] = apdef_phase(self.x_values(p[ker]), n[ker])
        return ph

    def iter_segments(self, lo: float = 2, hi: float | None = None) -> Iterator[tuple]:
        """Yield (PrimeStream, phases) covering the primes in [lo, hi), hi defaulting to P3."""
        hi = self.P3 if hi is None else hi
        carry = (0.0, 0.0)
        start = lo
        if self.rule == "recursive" and hi > self.P2 and lo > self.P2:
            start = self.P2  # the running sum must be rebuilt from P2
        for seg in iter_prime_segments(start, hi, self.segment_len, self.max_primes):
            p, n = seg.primes, seg.indices
            ph = self._direct_phases(p, n)
            if self.rule == "recursive":
                ker = np.nonzero((p >= self.P2) & (p < self.P3))[0]
                if len(ker):
                    pk = p[ker].astype(np.float64)
                    I = self.kernel.cumulative(np.clip(self.delta * np.log(pk), self.kernel.A, self.kernel.B))
                    out, cr, ci = _greedy_phases(1.0 / pk, np.ascontiguousarray(I.real),
                                                 np.ascontiguousarray(I.imag), *carry)
                    carry = (cr, ci)
                    ph[ker] = out
            if start < lo:
                keep = p >= lo
                if not np.any(keep):
                    continue
                first = int(np.argmax(keep))
                seg = type(seg)(max(seg.segment_lo, int(lo)), seg.segment_hi, p[first:],
                                seg.global_index_offset + first)
                ph = ph[first:]
            yield seg, ph

    def entries(self, lo: float, hi: float) -> list[tuple[int, int, float]]:
        """Materialized (p_n, n, phase) for a (small) range of primes."""
        out = []
        for seg, ph in self.iter_segments(lo, hi):
            out.extend(zip(seg.primes.tolist(), seg.indices.tolist(), ph.tolist()))
        return out

    def to_csv(self, path, lo: float = 2, hi: float | None = None) -> int:
        rows = 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "n", "phase"])
            for seg, ph in self.iter_segments(lo, hi):
                for p, n, f in zip(seg.primes.tolist(), seg.indices.tolist(), ph.tolist()):
                    w.writerow([p, n, format(f, ".17g")])
                    rows += 1
        return rows


def assign_coefficients(ts: ThresholdSet, gt: KernelTable, head_phases=None, **kw) -> CoefficientTable:
    """Table following the four-region rule with kernel phases xi_n +- theta_n."""
    if gt.max_scaled > 1 + BOUND_SLACK:
        raise KernelBoundViolated(f"kernel has max |x g(x)| = {gt.max_scaled:.15g} > 1")
    hp, hph = ts.head_primes, ts.head_phases if head_phases is None else np.asarray(head_phases)
    return CoefficientTable("apdef", ts.delta, ts.P0, ts.P1, ts.P2, ts.P3, gt, hp, hph,
                            thresholds=ts, **kw)


def assign_coefficients_recursive(ts: ThresholdSet, kt: KernelTable, **kw) -> CoefficientTable:
    """Table whose kernel-range phases point along the running deficit
    int_A^{delta log p} g - sum_{P2 <= q < p} a_q/q (phase 0 when the deficit vanishes)."""
    if kt.max_scaled > 1 + BOUND_SLACK:
        raise KernelBoundViolated(f"kernel has max |x g(x)| = {kt.max_scaled:.15g} > 1")
    return CoefficientTable("recursive", ts.delta, ts.P0, ts.P1, ts.P2, ts.P3, kt,
                            ts.head_primes, ts.head_phases, thresholds=ts, **kw)


# ---------------------------------------------------------------------------
# the streaming pass


def _quadratic_part(w):
    """-log(1 - w) - w without cancellation for small |w|."""
    small = np.abs(w) < 1e-3
    out = np.empty_like(w)
    ws = w[small]
    out[small] = ws * ws * (0.5 + ws * (1.0 / 3 + ws * (0.25 + ws * 0.2)))
    wl = w[~small]
    out[~small] = -np.log1p(-wl) - wl
    return out


@dataclass
class TableSums:
    """Every prime sum the verifier needs, from one pass over the primes below P3."""

    zs: np.ndarray
    head_log_1: complex = 0.0j
    head_log_z: np.ndarray = None
    quad: np.ndarray = None
    lin_mid: np.ndarray = None
    lin_ker: np.ndarray = None
    alt_box: np.ndarray = None  # rows: re_min, re_max, im_min, im_max of parity partial sums
    lam_xs: np.ndarray = None
    lam_values: np.ndarray = None
    lam_sup: float = 0.0
    lam_total: complex = 0.0j
    thr_s: np.ndarray = None
    thr_lhs: np.ndarray = None
    thr_step: np.ndarray = None  # int_A^B S(x) e^{-sx} dx, S the step function of prime sums
    counts: dict = field(default_factory=dict)

    def h_values(self) -> np.ndarray:
        """Explicit -sum_{p < P3} log(1 - a_p p^-z) at every z."""
        return -self.head_log_z + self.quad + self.lin_mid + self.lin_ker


def scan_table(table: CoefficientTable, gt: KernelTable | None = None, zs=None,
               lambda_grid: int | Sequence[float] | None = None, thr_s=()) -> TableSums:
    """One pass over the primes below P3.

    ``zs`` are the points 1 + delta s (may be None to skip all z-sums, in which
    case only the kernel range is visited). ``lambda_grid`` asks for Lambda_delta
    on that many grid points of [A, B] (or on the given points). ``thr_s`` are
    points where both sides of the partial-integration identity are
    accumulated.
    """
    zs = None if zs is None else np.atleast_1d(np.asarray(zs, dtype=complex))
    nz = 0 if zs is None else len(zs)
    out = TableSums(zs=zs if zs is not None else np.zeros(0, complex))
    out.head_log_z = np.zeros(nz, complex)
    out.quad = np.zeros(nz, complex)
    out.lin_mid = np.zeros(nz, complex)
    out.lin_ker = np.zeros(nz, complex)
    box = np.array([[np.inf] * nz, [-np.inf] * nz, [np.inf] * nz, [-np.inf] * nz])
    alt_carry = np.zeros(nz, complex)
    counts = {"head": 0, "parity": 0, "kernel": 0}

    want_ker = gt is not None
    if want_ker:
        A, B = gt.A, gt.B
        if lambda_grid is None:
            lam_xs = np.zeros(0)
        elif np.ndim(lambda_grid) == 0:
            lam_xs = np.linspace(A, B, int(lambda_grid))
        else:
            lam_xs = np.asarray(lambda_grid, dtype=np.float64)
        lam_S = np.full(len(lam_xs), np.nan + 0j)
        thr_s = np.atleast_1d(np.asarray(thr_s, dtype=complex))
        thr_lhs = np.zeros(len(thr_s), complex)
        thr_step = np.zeros(len(thr_s), complex)
        pending = None  # (S_last, x_last) waiting for the next prime
        S = 0.0j
        lam_sup = 0.0
        filled = 0

    lo = 2 if zs is not None else table.P2
    segments = table.iter_segments(lo, table.P3)
    for seg, ph in segments:
        p = seg.primes
        pf = p.astype(np.float64)
        logp = np.log(pf)
        a = np.exp(1j * ph)
        if zs is not None:
            head = p < table.P1
            nh = int(np.count_nonzero(head))
            if nh:
                counts["head"] += nh
                out.head_log_1 += complex(np.sum(np.log1p(-a[head] / pf[head])))
            for c0 in range(0, nz, 16):
                zc = zs[c0:c0 + 16]
                base = np.exp(-np.outer(zc, logp))
                w = base * a[None, :]
                if nh:
                    out.head_log_z[c0:c0 + 16] += np.log1p(-w[:, head]).sum(axis=1)
                rest = ~head
                if np.any(rest):
                    wr = w[:, rest]
                    out.quad[c0:c0 + 16] += _quadratic_part(wr).sum(axis=1)
                    mid = (p[rest] < table.P2)
                    out.lin_mid[c0:c0 + 16] += wr[:, mid].sum(axis=1)
                    out.lin_ker[c0:c0 + 16] += wr[:, ~mid].sum(axis=1)
                alt = p >= table.P0
                if np.any(alt):
                    terms = base[:, alt] * seg.signs[alt][None, :]
                    part = alt_carry[c0:c0 + 16, None] + np.cumsum(terms, axis=1)
                    b = box[:, c0:c0 + 16]
                    b[0] = np.minimum(b[0], part.real.min(axis=1))
                    b[1] = np.maximum(b[1], part.real.max(axis=1))
                    b[2] = np.minimum(b[2], part.imag.min(axis=1))
                    b[3] = np.maximum(b[3], part.imag.max(axis=1))
                    alt_carry[c0:c0 + 16] = part[:, -1]
            counts["parity"] += int(np.count_nonzero((p >= table.P1) & ((p < table.P2))))
        if want_ker:
            ker = (p >= table.P2) & (p < table.P3)
            if not np.any(ker):
                continue
            counts["kernel"] += int(np.count_nonzero(ker))
            xk = table.delta * logp[ker]
            inc = a[ker] / pf[ker]
            Sk = S + np.cumsum(inc)
            I = gt.cumulative(xk)
            after = np.abs(Sk - I)
            before = np.abs(np.concatenate([[S], Sk[:-1]]) - I)
            lam_sup = max(lam_sup, float(after.max()), float(before.max()))
            # Lambda on the grid: S(x) counts primes with x_p < x
            if filled < len(lam_xs):
                upto = np.searchsorted(lam_xs, xk[-1], side="right")
                sel = np.arange(filled, upto)
                if len(sel):
                    k = np.searchsorted(xk, lam_xs[sel], side="left")
                    lam_S[sel] = np.where(k > 0, Sk[np.maximum(k - 1, 0)], S)
                    filled = upto
            for i, s in enumerate(thr_s):
                E = np.exp(-s * xk)
                thr_lhs[i] += np.sum(inc * E)
                if s == 0:
                    D = np.diff(xk)
                    first_gap = xk[0]
                else:
                    D = E[:-1] - E[1:]
                    first_gap = E[0]
                step = np.sum(Sk[:-1] * D)
                if pending is not None:
                    S_last, x_last = pending
                    if s == 0:
                        step += S_last * (first_gap - x_last)
                    else:
                        step += S_last * (np.exp(-s * x_last) - first_gap)
                thr_step[i] += step
            pending = (Sk[-1], xk[-1])
            S = Sk[-1]

    if zs is not None:
        out.alt_box = box
        out.counts = counts
    else:
        out.counts = {"kernel": counts["kernel"]}
    if want_ker:
        if pending is not None:
            S_last, x_last = pending
            for i, s in enumerate(thr_s):
                thr_step[i] += S_last * ((B - x_last) if s == 0 else (np.exp(-s * x_last) - np.exp(-s * B)))
        # the accumulated values are s * int S e^{-sx} (or int S for s = 0)
        nzs = thr_s != 0
        thr_step[nzs] /= thr_s[nzs]
        lam_S[filled:] = S
        # the closing value at B
        lam_sup = max(lam_sup, abs(S - gt.total_integral))
        out.lam_xs = lam_xs
        out.lam_values = lam_S - gt.cumulative(lam_xs) if len(lam_xs) else np.zeros(0, complex)
        out.lam_sup = lam_sup
        out.lam_total = S
        out.thr_s, out.thr_lhs, out.thr_step = thr_s, thr_lhs, thr_step
    return out


# ---------------------------------------------------------------------------
# Lambda_delta and h(s)


@dataclass(frozen=True)
class LambdaProfile:
    delta: float
    xs: np.ndarray
    values: np.ndarray
    sup_abs: float
    fitted_C1: float


def lambda_profile(table: CoefficientTable, gt: KernelTable, ts: ThresholdSet | None = None,
                   grid: int = 257, sums: TableSums | None = None) -> LambdaProfile:
    """Lambda_delta(x) = sum_{A <= delta log p < x} a_p/p - int_A^x g~ on a grid of [A, B].

    ``sup_abs`` is the sup over the continuum: Lambda only jumps at primes, so
    it is the largest modulus seen just before or just after a jump.
    """
    if sums is None or sums.lam_xs is None or len(sums.lam_xs) != grid:
        sums = scan_table(table, gt, None, lambda_grid=grid)
    return LambdaProfile(table.delta, sums.lam_xs, sums.lam_values, sums.lam_sup,
                         sums.lam_sup / table.delta)


def fit_C1(profiles: Sequence[LambdaProfile]) -> dict:
    """Smallest C1 with sup_abs <= C1 delta for every profile, plus the least-squares slope."""
    d = np.array([pr.delta for pr in profiles])
    s = np.array([pr.sup_abs for pr in profiles])
    return {"C1": float(np.max(s / d)), "C1_lsq": float(np.sum(s * d) / np.sum(d * d)),
            "ratios": (s / d).tolist()}


def tail_radius(table: CoefficientTable, s) -> np.ndarray:
    """Certified bound on |h(s) - explicit sum over p < P3|."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    sigma = s.real
    P = table.P3
    y = max(P - 1.0, 2.0)
    r = np.full(len(s), np.inf)
    if table.tail_rule == "uniform":
        ok = sigma > 1
        sg = sigma[ok]
        r[ok] = y ** (1 - sg) / ((sg - 1) * (1 - y ** (-sg)))
        return r
    ok = sigma > 0.5
    sg = sigma[ok]
    quad = y ** (1 - 2 * sg) / (2 * (2 * sg - 1) * (1 - y ** (-sg)))
    r[ok] = alternating_tail_bound(s[ok], P) + quad
    return r


def euler_product_log(table: CoefficientTable, s, tail_tol: float = 1e-6, margin: float = 0.25):
    """h(s) = -sum_p log(1 - a_p p^-s) as (value, tail_radius).

    Primes below P3 are summed explicitly; the rest is covered by the
    certified ``tail_radius``. Accepts a scalar or an array of s.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(s.real <= 0.5 + margin):
        raise TailNotCertified(f"Re(s) must exceed {0.5 + margin}; got min {float(s.real.min())}")
    rad = tail_radius(table, s)
    if np.any(rad > tail_tol):
        raise TailNotCertified(
            f"tail radius {float(np.max(rad)):.3g} above {tail_tol:.3g} with cutoff {table.P3:.6g}")
    total = np.zeros(len(s), complex)
    for seg, ph in table.iter_segments(2, table.P3):
        logp = np.log(seg.primes.astype(np.float64))
        a = np.exp(1j * ph)
        for c0 in range(0, len(s), 16):
            w = np.exp(-np.outer(s[c0:c0 + 16], logp)) * a[None, :]
            total[c0:c0 + 16] -= np.log1p(-w).sum(axis=1)
    if scalar:
        return complex(total[0]), float(rad[0])
    return total, rad


# ---------------------------------------------------------------------------
# spot checks


def sample_entries(table: CoefficientTable, k: int, seed: int = 0):
    """k table entries at primes drawn log-uniformly from [2, P3), as arrays (p, n, phase)."""
    rng = np.random.default_rng(seed)
    targets = np.sort(np.exp(rng.uniform(math.log(2), math.log(table.P3), k)))
    ps, ns, phs = [], [], []
    j = 0
    last = None
    for seg, ph in table.iter_segments(2, table.P3):
        if j >= k:
            break
        if len(seg) == 0:
            continue
        last = (seg.primes[-1], seg.indices[-1], ph[-1])
        stop = np.searchsorted(targets, seg.primes[-1], side="right")
        if stop > j:
            pos = np.searchsorted(seg.primes, targets[j:stop], side="left")
            ps.append(seg.primes[pos])
            ns.append(seg.indices[pos])
            phs.append(ph[pos])
            j = stop
    if last is not None and j < k:
        # targets between the last prime and P3 fall back to that prime
        ps.append(np.full(k - j, last[0]))
        ns.append(np.full(k - j, last[1]))
        phs.append(np.full(k - j, last[2]))
    if not ps:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(ps), np.concatenate(ns), np.concatenate(phs)


def recompute_phases(table: CoefficientTable, p, n) -> np.ndarray:
    """Phases rebuilt from (p_n, n, x_n) alone; NaN where the rule needs the running sum."""
    ph = table._direct_phases(np.asarray(p), np.asarray(n)).astype(np.float64)
    if table.rule == "recursive":
        ker = (np.asarray(p) >= table.P2) & (np.asarray(p) < table.P3)
        ph[ker] = np.nan
    return ph

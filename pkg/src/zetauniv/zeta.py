"""Riemann zeta near the 1-line.

Pointwise values come from Euler-Maclaurin summation with a cutoff that grows
with the height. Scans over a uniform grid of heights reuse the same formula,
but the Dirichlet polynomial part is evaluated for a whole block of heights at
once with a type-1 non-uniform FFT.

``log_zeta_tracked`` continues log zeta horizontally from Re(s) = 2, where the
principal logarithm is the Euler-product branch, so its imaginary part never
jumps by 2*pi.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import bernoulli, loggamma

from .errors import (
    BranchTrackingFailed,
    HeightBudgetExceeded,
    PoleAtOne,
    ToleranceNotReached,
)

TWO_PI_L = np.longdouble(2) * np.longdouble(np.pi)


@dataclass(frozen=True)
class ZetaConfig:
    em_terms: int = 10
    em_order: int = 8
    target_abs_error: float = 1e-10
    height_budget: float = 1e6
    pole_guard: float = 1e-10
    branch_guard: float = 1e-3
    path_step: float = 0.25
    grid_path_step: float = 0.025
    chunk: int = 2**16
    nufft_eps: float = 1e-13
    nthreads: int = 1

    def __post_init__(self):
        if self.target_abs_error <= 0:
            raise ValueError("target_abs_error must be positive")
        if self.em_terms < 10:
            raise ValueError("em_terms must be at least 10")
        if self.em_order < 1:
            raise ValueError("em_order must be at least 1")

    def cutoff(self, height: float) -> int:
        """Direct-sum length N for heights up to ``height``."""
        return max(self.em_terms, 10, int(math.ceil(2.0 * abs(height))))


@lru_cache(maxsize=None)
def _em_coefficients(order: int) -> np.ndarray:
    """B_{2k} / (2k)! for k = 1 .. order + 1 (the last one is for the remainder)."""
    b = bernoulli(2 * order + 2)
    return np.array(
        [b[2 * k] / math.factorial(2 * k) for k in range(1, order + 2)], dtype=np.float64
    )


def _phase_exp(t, logs):
    """exp(-i t log n) with the phase reduced in extended precision."""
    ph = np.multiply.outer(np.asarray(t, dtype=np.longdouble), logs)
    ph = np.fmod(ph, TWO_PI_L).astype(np.float64)
    return np.exp(-1j * ph)


@lru_cache(maxsize=8)
def _log_table(N: int):
    n = np.arange(1, N, dtype=np.float64)
    return np.log(n), np.log(np.arange(1, N, dtype=np.longdouble))


def _em_tail(sigma, t, N: int, order: int):
    """Euler-Maclaurin terms after the direct sum sum_{n<N} n^-s.

    Returns (tail, remainder_bound) for arrays of sigma, t.
    """
    s = np.asarray(sigma, dtype=np.float64) + 1j * np.asarray(t, dtype=np.float64)
    logN = math.log(N)
    Nms = np.exp(-s.real * logN) * _phase_exp(s.imag, np.longdouble(logN))
    tail = N * Nms / (s - 1.0) + 0.5 * Nms
    coef = _em_coefficients(order)
    rising = s.copy()
    power = Nms / N
    term = None
    for k in range(1, order + 2):
        term = coef[k - 1] * rising * power
        if k <= order:
            tail = tail + term
            rising = rising * (s + 2 * k - 1) * (s + 2 * k)
            power = power / (N * N)
    rem = np.abs(term) * np.abs(s + 2 * order + 1) / (s.real + 2 * order + 1)
    return tail, rem


def _check_point(s: complex, cfg: ZetaConfig):
    if s.real <= 0:
        raise ValueError(f"zeta evaluator needs Re(s) > 0, got {s}")
    if abs(s - 1) < cfg.pole_guard:
        raise PoleAtOne(f"s={s} is within {cfg.pole_guard} of the pole")
    if abs(s.imag) > cfg.height_budget:
        raise HeightBudgetExceeded(f"|Im s|={abs(s.imag):.6g} exceeds {cfg.height_budget:.6g}")


def zeta(s, cfg: ZetaConfig = ZetaConfig()) -> complex:
    """zeta(s) for Re(s) > 0 by Euler-Maclaurin summation."""
    s = complex(s)
    _check_point(s, cfg)
    N = cfg.cutoff(s.imag)
    for _ in range(4):
        logs, logs_l = _log_table(N)
        head = np.sum(np.exp(-s.real * logs) * _phase_exp(s.imag, logs_l))
        tail, rem = _em_tail(s.real, s.imag, N, cfg.em_order)
        if rem <= cfg.target_abs_error:
            return complex(head + tail)
        N *= 2
    raise ToleranceNotReached(f"Euler-Maclaurin remainder {float(rem):.3g} above target at s={s}")


def eta_oracle(s, terms: int | None = None, tol: float = 1e-12) -> complex:
    """zeta(s) from the alternating eta series, Borwein-accelerated.

    Independent of the Euler-Maclaurin path; only meant for cross-checks.
    """
    s = complex(s)
    if s.real <= 0:
        raise ValueError("eta_oracle needs Re(s) > 0")
    if abs(s - 1) < 1e-12:
        raise PoleAtOne("eta_oracle: s = 1 is a pole")
    denom = 1 - 2 ** (1 - s)
    if abs(denom) < 1e-3:
        raise ToleranceNotReached(f"1 - 2^(1-s) = {denom:.3g} too small at s={s}")
    # Borwein: |error| <= 2 / (3+sqrt 8)^n / |Gamma(s)| / |1 - 2^(1-s)|
    log_scale = math.log(2) - loggamma(s).real - math.log(abs(denom))
    need = int(math.ceil((log_scale - math.log(tol)) / math.log(3 + math.sqrt(8)))) + 1
    n = max(need, 8) if terms is None else int(terms)
    if n < need or n > 400:
        raise ToleranceNotReached(f"eta_oracle needs {need} terms at s={s}, have {n}")
    # d_k = n sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!)
    term = np.empty(n + 1)
    term[0] = 1.0 / n
    for i in range(1, n + 1):
        term[i] = term[i - 1] * 4.0 * (n + i - 1) * (n - i + 1) / ((2 * i) * (2 * i - 1))
    d = n * np.cumsum(term)
    weights = 1.0 - d[:n] / d[n]
    k = np.arange(n)
    signs = np.where(k % 2 == 0, 1.0, -1.0)
    eta = np.sum(signs * weights * np.exp(-s * np.log(k + 1.0)))
    return complex(eta / denom)


def log_zeta_tracked(s, cfg: ZetaConfig = ZetaConfig()) -> complex:
    """log zeta(s) continued along the horizontal segment from 2 + i Im(s).

    The step halves whenever the argument moves by pi/4 or more; any node with
    |zeta| below ``cfg.branch_guard`` aborts with BranchTrackingFailed.
    """
    s = complex(s)
    if s.real < 0.75:
        raise ValueError("log_zeta_tracked needs Re(s) >= 3/4")
    _check_point(s, cfg)
    t = s.imag
    if s.real >= 2:
        return cmath.log(zeta(s, cfg))
    a = 2.0
    za = zeta(complex(a, t), cfg)
    L = cmath.log(za)
    h = cfg.path_step
    while a > s.real:
        b = max(s.real, a - h)
        zb = zeta(complex(b, t), cfg)
        if abs(zb) < cfg.branch_guard:
            raise BranchTrackingFailed(f"|zeta({b}+{t}i)| = {abs(zb):.3g} below guard")
        d = cmath.log(zb / za)
        if abs(d.imag) >= math.pi / 4:
            h /= 2
            if h < 1e-7:
                raise BranchTrackingFailed(f"step underflow while tracking at {b}+{t}i")
            continue
        L += d
        a, za = b, zb
    return L


# ---------------------------------------------------------------------------
# uniform height grids


def _nufft1(x, c, n_modes, eps, nthreads):
    import finufft

    return finufft.nufft1d1(x, c, n_modes, eps=eps, isign=1, modeord=0, nthreads=nthreads)


def zeta_on_grid(sigma: float, t0: float, step: float, count: int,
                 cfg: ZetaConfig = ZetaConfig()) -> np.ndarray:
    """zeta(sigma + i (t0 + j step)) for j = 0 .. count-1.

    Each block of ``cfg.chunk`` heights shares one Euler-Maclaurin cutoff (set by
    the largest height in the block); the direct sum is a single NUFFT.
    """
    if sigma <= 0:
        raise ValueError("zeta_on_grid needs sigma > 0")
    t_last = t0 + step * (count - 1)
    if max(abs(t0), abs(t_last)) > cfg.height_budget:
        raise HeightBudgetExceeded(f"grid reaches height {max(abs(t0), abs(t_last)):.6g}")
    out = np.empty(count, dtype=complex)
    J = int(cfg.chunk)
    for start in range(0, count, J):
        m = min(J, count - start)
        Jm = m + (m % 2)
        ts = t0 + step * (start + np.arange(m))
        if np.any(np.abs(sigma + 1j * ts - 1) < cfg.pole_guard):
            raise PoleAtOne("height grid passes through the pole")
        center = t0 + step * (start + Jm // 2)
        N = cfg.cutoff(max(abs(ts[0]), abs(ts[-1])))
        while True:
            tail, rem = _em_tail(sigma, ts, N, cfg.em_order)
            if np.max(rem) <= cfg.target_abs_error:
                break
            N *= 2
        logs, logs_l = _log_table(N)
        c = np.exp(-sigma * logs) * _phase_exp(center, logs_l)
        x = np.mod(-step * logs + np.pi, 2 * np.pi) - np.pi
        f = _nufft1(x, c, Jm, cfg.nufft_eps, cfg.nthreads)
        out[start:start + m] = f[:m] + tail
    return out


def log_zeta_on_grid(sigmas, t0: float, step: float, count: int,
                     cfg: ZetaConfig = ZetaConfig()):
    """Tracked log zeta at every sigma in ``sigmas`` over a uniform height grid.

    All sigmas share one horizontal path of nodes from Re = 2 down to the
    smallest requested sigma. Heights where any path step turns the argument by
    pi/4 or more, or |zeta| drops below the guard, are redone pointwise with
    adaptive tracking; those that still fail are NaN in the result and flagged
    in the returned mask.

    Returns (values[len(sigmas), count], failed[count]).
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if np.any(sigmas < 0.75):
        raise ValueError("log_zeta_on_grid needs sigma >= 3/4")
    lo = float(np.min(sigmas))
    path = list(np.arange(2.0, lo, -cfg.grid_path_step))
    nodes = np.array(sorted(set(path) | set(sigmas[sigmas < 2].tolist()) | {2.0}, reverse=True))
    row = {float(v): i for i, v in enumerate(nodes)}
    values = np.empty((len(sigmas), count), dtype=complex)
    failed = np.zeros(count, dtype=bool)
    J = int(cfg.chunk)
    for start in range(0, count, J):
        m = min(J, count - start)
        t_start = t0 + step * start
        Z = np.vstack([zeta_on_grid(float(sg), t_start, step, m, cfg) for sg in nodes])
        d = np.log(Z[1:] / Z[:-1])
        bad = (np.abs(Z) < cfg.branch_guard).any(axis=0)
        if len(d):
            bad |= (np.abs(d.imag) >= math.pi / 4).any(axis=0)
        L = np.vstack([np.log(Z[:1]), np.log(Z[:1]) + np.cumsum(d, axis=0)])
        for i, sg in enumerate(sigmas):
            if sg >= 2:
                values[i, start:start + m] = np.log(
                    zeta_on_grid(float(sg), t_start, step, m, cfg))
            else:
                values[i, start:start + m] = L[row[float(sg)]]
        for j in np.nonzero(bad)[0]:
            t = t_start + step * j
            try:
                for i, sg in enumerate(sigmas):
                    values[i, start + j] = log_zeta_tracked(complex(sg, t), cfg)
            except BranchTrackingFailed:
                values[:, start + j] = np.nan
                failed[start + j] = True
    return values, failed

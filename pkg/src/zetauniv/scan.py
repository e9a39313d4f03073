"""Scans of zeta along the 1-line: densities of good shifts and window maxima.

The height grid is t_j = j * step for j = 1 .. floor(T / step); t = 0 is left
out because it sits on the pole. For a compact K every sample s contributes the
point 1 + it + delta s, so samples are grouped by Im(delta s) and each group is
one uniform height grid shifted by that offset.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import HeightBudgetExceeded, ValidationError
from .regions import CompactRegion
from .zeta import ZetaConfig, log_zeta_on_grid, zeta_on_grid

EXTREMAL_CONSTANT = math.pi ** 2 * math.exp(-np.euler_gamma) / 24


@dataclass(frozen=True)
class ScanRecord:
    t: float
    sup_error: float
    hit: bool


@dataclass
class DensityEstimate:
    T: float
    step: float
    epsilon: float
    t: np.ndarray
    sup_errors: np.ndarray
    failed: np.ndarray
    hit_runs: list = field(default_factory=list)

    @property
    def hits(self) -> np.ndarray:
        return ~self.failed & (self.sup_errors < self.epsilon)

    @property
    def n_points(self) -> int:
        return len(self.t)

    @property
    def n_hits(self) -> int:
        return int(np.count_nonzero(self.hits))

    @property
    def branch_failures(self) -> int:
        return int(np.count_nonzero(self.failed))

    @property
    def hit_fraction(self) -> float:
        """Hits over grid points where the evaluation succeeded."""
        usable = self.n_points - self.branch_failures
        return self.n_hits / usable if usable else 0.0

    def records(self) -> Iterator[ScanRecord]:
        hits = self.hits
        for t, e, h in zip(self.t.tolist(), self.sup_errors.tolist(), hits.tolist()):
            yield ScanRecord(t, e, h)

    def summary(self) -> dict:
        return {"T": self.T, "step": self.step, "epsilon": self.epsilon,
                "points": self.n_points, "hits": self.n_hits,
                "branch_failures": self.branch_failures,
                "hit_fraction": self.hit_fraction, "hit_runs": len(self.hit_runs)}


@dataclass
class WindowMinRecord:
    delta_window: float
    t_at_min: float
    window_max_min: float
    bound: float
    T: float
    step: float
    window_starts: np.ndarray = None
    window_max: np.ndarray = None

    @property
    def ratio(self) -> float:
        return self.window_max_min / self.bound

    @property
    def passed(self) -> bool:
        return self.window_max_min >= 0.9 * self.bound

    def summary(self) -> dict:
        return {"delta_window": self.delta_window, "T": self.T, "step": self.step,
                "t_at_min": self.t_at_min, "window_max_min": self.window_max_min,
                "bound": self.bound, "ratio": self.ratio, "passed": self.passed}


def extremal_bound(delta: float) -> float:
    """(pi^2 e^{-gamma} / 24) * delta."""
    return EXTREMAL_CONSTANT * delta


def height_grid(T: float, step: float) -> np.ndarray:
    if step <= 0 or T <= 0:
        raise ValueError("T and step must be positive")
    n = int(math.floor(T / step + 1e-9))
    return step * np.arange(1, n + 1)


def hit_runs(t: np.ndarray, hits: np.ndarray) -> list[tuple[float, float]]:
    """Maximal runs of consecutive hits as (first t, last t)."""
    if len(t) == 0 or not np.any(hits):
        return []
    h = np.concatenate([[False], hits, [False]]).astype(np.int8)
    d = np.diff(h)
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0] - 1
    return [(float(t[a]), float(t[b])) for a, b in zip(starts, ends)]


def _groups(K: CompactRegion, delta: float):
    s = K.samples
    offs = np.round(delta * s.imag, 14)
    out = []
    for y in np.unique(offs):
        idx = np.nonzero(offs == y)[0]
        out.append((float(y), idx))
    return s, out


def _validate(K, delta, T, step, cfg):
    if delta <= 0:
        raise ValueError("delta must be positive")
    if np.min(1 + delta * K.samples.real) < 0.75:
        raise ValueError("need Re(1 + delta s) >= 3/4 on K")
    top = T + delta * float(np.max(np.abs(K.samples.imag)))
    if top > cfg.height_budget:
        raise HeightBudgetExceeded(f"scan reaches height {top:.6g} above budget {cfg.height_budget:.6g}")


def _scan(f, K, delta, epsilon, T, step, cfg, evaluate) -> DensityEstimate:
    _validate(K, delta, T, step, cfg)
    t = height_grid(T, step)
    n = len(t)
    s, groups = _groups(K, delta)
    fs = np.asarray(f(s), dtype=complex)
    sup = np.zeros(n)
    failed = np.zeros(n, dtype=bool)
    block = int(cfg.chunk)
    for start in range(0, n, block):
        m = min(block, n - start)
        for y, idx in groups:
            sig = 1.0 + delta * s[idx].real
            vals, bad = evaluate(sig, t[start] + y, m)
            err = np.abs(vals - fs[idx][:, None]).max(axis=0)
            sup[start:start + m] = np.maximum(sup[start:start + m], np.where(bad, 0.0, err))
            failed[start:start + m] |= bad
    sup[failed] = np.nan
    est = DensityEstimate(T, step, epsilon, t, sup, failed)
    est.hit_runs = hit_runs(t, est.hits)
    return est


def scan_theorem2(f, K: CompactRegion, delta: float, epsilon: float, T: float, step: float = 0.05,
                  cfg: ZetaConfig = ZetaConfig()) -> DensityEstimate:
    """Shifts t with max over K of |log zeta(1 + it + delta s) - f(s)| < epsilon."""

    def evaluate(sig, t0, m):
        uniq, inv = np.unique(sig, return_inverse=True)
        vals, bad = log_zeta_on_grid(uniq, t0, step, m, cfg)
        return vals[inv], bad

    return _scan(f, K, delta, epsilon, T, step, cfg, evaluate)


def scan_theorem1(f, K: CompactRegion, delta: float, C: complex, epsilon: float, T: float,
                  step: float = 0.05, cfg: ZetaConfig = ZetaConfig()) -> DensityEstimate:
    """Shifts t with max over K of |zeta(1 + it + delta s) + C - f(s)| < epsilon."""
    C = complex(C)
    fmax = float(np.max(np.abs(np.asarray(f(K.samples), dtype=complex))))
    C0 = 1 + 4 * fmax / epsilon if epsilon > 0 else math.inf
    if abs(C) < C0:
        warnings.warn(f"|C| = {abs(C):.4g} is below C0 = {C0:.4g}; the constant-shift hypothesis fails",
                      stacklevel=2)

    def evaluate(sig, t0, m):
        uniq, inv = np.unique(sig, return_inverse=True)
        Z = np.vstack([zeta_on_grid(float(sg), t0, step, m, cfg) for sg in uniq])
        return Z[inv] + C, np.zeros(m, dtype=bool)

    return _scan(f, K, delta, epsilon, T, step, cfg, evaluate)


def zeta_modulus_on_line(T: float, step: float, cfg: ZetaConfig = ZetaConfig()):
    t = height_grid(T, step)
    if t[-1] > cfg.height_budget:
        raise HeightBudgetExceeded(f"scan reaches height {t[-1]:.6g} above budget")
    vals = np.empty(len(t))
    block = int(cfg.chunk)
    for start in range(0, len(t), block):
        m = min(block, len(t) - start)
        vals[start:start + m] = np.abs(zeta_on_grid(1.0, t[start], step, m, cfg))
    return t, vals


def extremal_window_scan(delta_window: float, T: float, step: float = 0.05,
                         cfg: ZetaConfig = ZetaConfig()) -> WindowMinRecord:
    """min over window starts of max_{t0 <= t <= t0 + delta} |zeta(1 + it)|."""
    if delta_window <= 0:
        raise ValidationError("delta_window must be positive", field="delta_window")
    if step > delta_window / 10 * (1 + 1e-12):
        raise ValidationError(f"step {step} exceeds delta_window/10 = {delta_window / 10}",
                              field="step")
    t, mod = zeta_modulus_on_line(T, step, cfg)
    w = int(round(delta_window / step))
    if len(t) <= w:
        raise ValueError("scan horizon shorter than one window")
    win = np.lib.stride_tricks.sliding_window_view(mod, w + 1).max(axis=1)
    k = int(np.argmin(win))
    return WindowMinRecord(delta_window, float(t[k]), float(win[k]), extremal_bound(delta_window),
                           T, step, t[: len(win)], win)

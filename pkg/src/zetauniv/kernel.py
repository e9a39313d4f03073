"""Laplace kernels g tabulated on a uniform grid over [A, B].

Between grid points the table interpolates u(x) = x g(x) linearly. A convex
combination never leaves the unit disk, so |x g(x)| <= 1 at the grid points
implies it everywhere, which is what the coefficient construction needs.
With this interpolant both the running integral of g and its Laplace
transform have exact closed forms panel by panel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import KernelBoundViolated

DEFAULT_POINTS = 4097
BOUND_SLACK = 1e-12
_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True, eq=False)
class KernelTable:
    A: float
    B: float
    samples: np.ndarray
    smoothed: bool = False
    bounded: bool = True
    c1_bound: float | None = None
    smoothing_slack: float | None = None

    def __post_init__(self):
        if not 0 < self.A < self.B:
            raise ValueError(f"kernel support needs 0 < A < B, got [{self.A}, {self.B}]")
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or len(s) < 2:
            raise ValueError("kernel table needs at least two samples")
        if not np.all(np.isfinite(s)):
            raise ValueError("kernel samples must be finite")
        object.__setattr__(self, "samples", s)
        if self.bounded and self.max_scaled > 1 + BOUND_SLACK:
            raise KernelBoundViolated(f"max |x g(x)| = {self.max_scaled:.15g} exceeds 1")
        if self.smoothed and self.c1_bound is not None:
            if self.second_difference_max > self.c1_bound * (1 + 1e-9) + 1e-15:
                raise ValueError("smoothed kernel fails its discrete C^1 bound")

    # -- grid -------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def grid_step(self) -> float:
        return (self.B - self.A) / (self.n - 1)

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(self.A, self.B, self.n)

    @cached_property
    def u(self) -> np.ndarray:
        """x g(x) at the grid points."""
        return self.xs * self.samples

    @property
    def max_scaled(self) -> float:
        return float(np.max(np.abs(self.xs * self.samples)))

    @property
    def second_difference_max(self) -> float:
        if self.n < 3:
            return 0.0
        return float(np.max(np.abs(np.diff(self.u, 2))))

    @classmethod
    def from_function(cls, func, A: float, B: float, points: int = DEFAULT_POINTS, **kw):
        xs = np.linspace(A, B, points)
        return cls(A, B, np.asarray(func(xs), dtype=complex) * np.ones(points), **kw)

    def with_samples(self, samples, **kw) -> "KernelTable":
        args = dict(smoothed=self.smoothed, bounded=self.bounded, c1_bound=self.c1_bound,
                    smoothing_slack=self.smoothing_slack)
        args.update(kw)
        return KernelTable(self.A, self.B, samples, **args)

    # -- interpolant ------------------------------------------------------

    @cached_property
    def _panels(self):
        x0 = self.xs[:-1]
        slope = np.diff(self.u) / self.grid_step
        alpha = self.u[:-1] - slope * x0
        # integral of g over each panel: alpha log(x1/x0) + slope h
        piece = alpha * np.log1p(self.grid_step / x0) + slope * self.grid_step
        cum = np.concatenate([[0.0], np.cumsum(piece)])
        return x0, slope, alpha, cum

    def _locate(self, x):
        j = np.floor((x - self.A) / self.grid_step).astype(np.int64)
        return np.clip(j, 0, self.n - 2)

    def scaled_value(self, x) -> np.ndarray:
        """Interpolated x g(x); zero outside [A, B]."""
        x = np.asarray(x, dtype=np.float64)
        j = self._locate(x)
        x0, slope, _, _ = self._panels
        out = self.u[j] + slope[j] * (x - x0[j])
        return np.where((x >= self.A) & (x <= self.B), out, 0.0)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, self.scaled_value(x) / x, 0.0)

    def cumulative(self, x) -> np.ndarray:
        """Exact integral of the interpolant from A to x (clamped to [A, B])."""
        x = np.clip(np.asarray(x, dtype=np.float64), self.A, self.B)
        j = self._locate(x)
        x0, slope, alpha, cum = self._panels
        d = x - x0[j]
        return cum[j] + alpha[j] * np.log1p(d / x0[j]) + slope[j] * d

    @property
    def total_integral(self) -> complex:
        return complex(self._panels[3][-1])

    @cached_property
    def _quad_nodes(self):
        h = self.grid_step
        mid = self.xs[:-1] + 0.5 * h
        X = (mid[:, None] + 0.5 * h * _GL_X[None, :]).ravel()
        W = np.tile(0.5 * h * _GL_W, self.n - 1)
        return X, W

    def transform(self, s) -> np.ndarray:
        """Exact-to-rounding integral over [A, B] of the interpolant times e^{-sx}."""
        s = np.asarray(s, dtype=complex)
        X, W = self._quad_nodes
        gw = self.value(X) * W
        flat = s.ravel()
        out = np.empty(len(flat), dtype=complex)
        for i in range(0, len(flat), 64):
            out[i:i + 64] = np.exp(-np.outer(flat[i:i + 64], X)) @ gw
        return out.reshape(s.shape)

    def moment_transform(self, s) -> np.ndarray:
        """Integral over [A, B] of cumulative(x) e^{-sx}."""
        s = np.asarray(s, dtype=complex)
        X, W = self._quad_nodes
        iw = self.cumulative(X) * W
        flat = s.ravel()
        out = np.array([np.exp(-z * X) @ iw for z in flat], dtype=complex)
        return out.reshape(s.shape)

    # -- serialization ----------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re_g", "im_g"])
            for x, g in zip(self.xs, self.samples):
                w.writerow([format(x, ".17g"), format(g.real, ".17g"), format(g.imag, ".17g")])

    @classmethod
    def from_csv(cls, path, **kw) -> "KernelTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        xs = np.array([float(r["x"]) for r in rows])
        g = np.array([complex(float(r["re_g"]), float(r["im_g"])) for r in rows])
        if len(xs) > 2 and np.max(np.abs(np.diff(xs, 2))) > 1e-9 * (xs[-1] - xs[0]):
            raise ValueError("kernel CSV grid is not uniform")
        return cls(float(xs[0]), float(xs[-1]), g, **kw)


def inverse_kernel(x):
    """min(1, 1/x), the kernel with |x g(x)| <= 1 used in the acceptance scenario."""
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(1.0, 1.0 / x)

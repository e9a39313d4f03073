"""Discretized compact sets K with connected complement, and target functions on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SHAPES = ("rectangle", "disk", "segment", "polygon")


@dataclass(frozen=True)
class CompactRegion:
    description: str
    interior_samples: np.ndarray
    boundary_samples: np.ndarray
    diameter: float
    spacing: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.description not in SHAPES:
            raise ValueError(f"unknown shape {self.description!r}; expected one of {SHAPES}")
        if len(self.boundary_samples) == 0:
            raise ValueError("region needs at least one boundary sample")

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate([self.boundary_samples, self.interior_samples])

    @property
    def mesh(self) -> float:
        """Upper bound on the distance from any point of K to the nearest sample."""
        return 0.5 * self.spacing

    def scaled(self, delta: float) -> np.ndarray:
        """Samples of the embedding 1 + delta K."""
        return 1.0 + delta * self.samples

    def min_real(self) -> float:
        return float(np.min(self.samples.real))

    # -- constructors -----------------------------------------------------

    @classmethod
    def segment(cls, a=0.0, b=1.0, n: int = 11) -> "CompactRegion":
        a, b = complex(a), complex(b)
        pts = a + (b - a) * np.linspace(0.0, 1.0, max(int(n), 1))
        spacing = abs(b - a) / max(int(n) - 1, 1)
        # a segment is its own boundary in the plane
        return cls("segment", np.zeros(0, complex), pts, abs(b - a), spacing,
                   {"a": a, "b": b, "n": int(n)})

    @classmethod
    def point(cls, z=0.0) -> "CompactRegion":
        return cls.segment(z, z, 1)

    @classmethod
    def disk(cls, center=0.0, radius=1.0, n: int = 64, rings: int = 4) -> "CompactRegion":
        center = complex(center)
        theta = 2 * np.pi * np.arange(n) / n
        boundary = center + radius * np.exp(1j * theta)
        interior = [np.array([center])]
        for k in range(1, rings):
            r = radius * k / rings
            m = max(6, int(n * k / rings))
            interior.append(center + r * np.exp(1j * 2 * np.pi * np.arange(m) / m))
        spacing = max(2 * np.pi * radius / n, radius / rings)
        return cls("disk", np.concatenate(interior), boundary, 2 * radius, spacing,
                   {"center": center, "radius": float(radius), "n": int(n), "rings": int(rings)})

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, n: int = 8) -> "CompactRegion":
        xs = np.linspace(x0, x1, n + 1)
        ys = np.linspace(y0, y1, n + 1)
        X, Y = np.meshgrid(xs, ys)
        Z = X + 1j * Y
        edge = np.zeros_like(X, dtype=bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        spacing = max((x1 - x0), (y1 - y0)) / n
        return cls("rectangle", Z[~edge], Z[edge], float(np.hypot(x1 - x0, y1 - y0)), spacing,
                   {"x0": x0, "x1": x1, "y0": y0, "y1": y1, "n": int(n)})

    @classmethod
    def polygon(cls, vertices: Sequence[complex], n: int = 16) -> "CompactRegion":
        """Simple polygon (no holes); boundary sampled at n points per edge."""
        v = np.asarray(vertices, dtype=complex)
        if len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        w = np.roll(v, -1)
        boundary = np.concatenate([a + (b - a) * np.arange(n) / n for a, b in zip(v, w)])
        edge_len = np.abs(w - v)
        spacing = float(edge_len.max()) / n
        xs = np.arange(v.real.min(), v.real.max(), spacing)[1:]
        ys = np.arange(v.imag.min(), v.imag.max(), spacing)[1:]
        X, Y = np.meshgrid(xs, ys)
        cand = (X + 1j * Y).ravel()
        inside = _point_in_polygon(cand, v)
        diam = float(np.max(np.abs(v[:, None] - v[None, :])))
        return cls("polygon", cand[inside], boundary, diam, spacing,
                   {"vertices": v.tolist(), "n": int(n)})


def _point_in_polygon(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    x, y = z.real, z.imag
    inside = np.zeros(len(z), dtype=bool)
    for a, b in zip(v, np.roll(v, -1)):
        cond = (a.imag > y) != (b.imag > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        inside ^= cond & (x < xc)
    return inside


@dataclass(frozen=True)
class TargetFunction:
    """f on K: a polynomial, C + Laplace transform of a kernel table, or samples."""

    kind: str
    coefficients: tuple = ()
    kernel: object = None
    constant: complex = 0.0
    points: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("polynomial", "laplace_form", "tabulated"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind == "polynomial" and not np.all(np.isfinite(np.asarray(self.coefficients, complex))):
            raise ValueError("polynomial coefficients must be finite")
        if self.kind == "tabulated" and not np.all(np.isfinite(self.values)):
            raise ValueError("tabulated values must be finite")
        if self.kind == "laplace_form" and self.kernel is None:
            raise ValueError("laplace_form target needs a kernel table")

    @classmethod
    def polynomial(cls, coefficients) -> "TargetFunction":
        """Coefficients in ascending order of powers of s."""
        return cls("polynomial", tuple(complex(c) for c in coefficients))

    @classmethod
    def zero(cls) -> "TargetFunction":
        return cls.polynomial([0.0])

    @classmethod
    def laplace_form(cls, kernel, constant=0.0) -> "TargetFunction":
        return cls("laplace_form", kernel=kernel, constant=complex(constant))

    @classmethod
    def tabulate(cls, func: Callable, region: CompactRegion) -> "TargetFunction":
        pts = region.samples
        return cls("tabulated", points=pts, values=np.asarray(func(pts), dtype=complex))

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(s, np.asarray(self.coefficients, complex))
        if self.kind == "laplace_form":
            from .laplace import forward_laplace

            return self.constant + forward_laplace(self.kernel, s)
        flat = s.ravel()
        idx = np.array([int(np.argmin(np.abs(self.points - z))) for z in flat], dtype=int)
        if len(idx) and np.max(np.abs(self.points[idx] - flat)) > 1e-12:
            raise ValueError("tabulated target evaluated off its sample points")
        return self.values[idx].reshape(s.shape)

    def sup_on(self, region: CompactRegion) -> float:
        return float(np.max(np.abs(self(region.samples))))

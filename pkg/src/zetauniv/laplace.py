"""Polynomial surrogate, mollification, Bromwich inversion and truncation.

Chain: f on K  ->  polynomial p  ->  G(s) = p(s) / (1 + eps1 s)^(deg p + 2)
->  g = inverse Laplace transform of G  ->  g restricted to [A, B].
Each arrow has a measured sup-norm slack on the samples of K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaincc, gammaln

from .errors import (
    ApproximationFailed,
    QuadratureNotConverged,
    RegionOutsideHalfPlane,
    TruncationFailed,
)
from .kernel import DEFAULT_POINTS, KernelTable
from .regions import CompactRegion, TargetFunction

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# polynomial surrogate


@dataclass(frozen=True)
class PolyFit:
    coefficients: np.ndarray
    sup_error: float
    degree: int

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, complex), self.coefficients)


def fit_polynomial(f, K: CompactRegion, max_degree: int, tol: float) -> PolyFit:
    """Least-squares polynomial on all samples of K, degree raised until sup error < tol.

    The fit is done in the centred, scaled variable w = (s - c) / r through a QR
    factorization and converted back to monomials in s.
    """
    z = K.samples
    y = np.asarray(f(z), dtype=complex)
    if not np.all(np.isfinite(y)):
        raise ValueError("target is not finite on the samples of K")
    c = complex(np.mean(z))
    r = float(np.max(np.abs(z - c))) or 1.0
    w = (z - c) / r
    best = None
    for d in range(0, max_degree + 1):
        if d + 1 > len(z):
            break
        V = np.vander(w, d + 1, increasing=True)
        Q, R = np.linalg.qr(V)
        b = np.linalg.solve(R, Q.conj().T @ y)
        err = float(np.max(np.abs(V @ b - y)))
        coeffs = _to_monomial(b, c, r)
        best = PolyFit(coeffs, err, d)
        if err < tol:
            return best
    raise ApproximationFailed(
        f"sup error {best.sup_error:.3g} at degree {best.degree} does not reach {tol:.3g}",
        achieved_error=best.sup_error, degree=best.degree)


def _to_monomial(b, c, r):
    P = np.polynomial.Polynomial(b)
    shift = np.polynomial.Polynomial([-c / r, 1.0 / r])
    out = P(shift).coef.astype(complex)
    return out[: len(b)]


def _trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if len(nz) else c[:1]


# ---------------------------------------------------------------------------
# mollification


@dataclass(frozen=True, eq=False)
class MollifiedTarget:
    """G(s) = p(s) / (1 + eps1 s)^n, normally with n = deg p + 2."""

    poly: np.ndarray
    eps1: float
    n: int
    forced: bool = False

    def __post_init__(self):
        object.__setattr__(self, "poly", _trim(self.poly))
        if self.eps1 <= 0:
            raise ValueError("eps1 must be positive")
        if not self.forced and self.n != self.degree + 2:
            raise ValueError(f"n must equal deg p + 2 = {self.degree + 2}, got {self.n}")
        if self.n - self.degree < 2:
            raise ValueError("G must decay at least like |s|^-2")

    @property
    def degree(self) -> int:
        return len(self.poly) - 1

    @property
    def pole(self) -> float:
        return -1.0 / self.eps1

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return np.polynomial.polynomial.polyval(s, self.poly) / (1 + self.eps1 * s) ** self.n

    def p(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, complex), self.poly)

    def slack_on(self, K: CompactRegion) -> float:
        """sup over the samples of K of |G - p|."""
        z = K.samples
        return float(np.max(np.abs(self(z) - self.p(z))))

    def decay_bound(self, Y: float, c: float) -> float:
        """M with |G(c + iy)| <= M |y|^(deg p - n) for |y| >= Y."""
        k = np.arange(len(self.poly))
        M = np.sum(np.abs(self.poly) * (1 + abs(c) / Y) ** k * Y ** (k - self.degree))
        return float(M) / self.eps1 ** self.n


def mollify(poly, eps1: float, K: CompactRegion | None = None, n: int | None = None) -> MollifiedTarget:
    G = MollifiedTarget(np.asarray(poly, complex), eps1,
                        n if n is not None else len(_trim(poly)) + 1, forced=n is not None)
    if K is not None and K.min_real() <= G.pole:
        raise RegionOutsideHalfPlane(
            f"K reaches Re(s) = {K.min_real():.6g}, not inside Re(s) > {G.pole:.6g}")
    return G


def choose_eps1(poly, K: CompactRegion, tol: float, start: float = 0.5,
                iterations: int = 30) -> tuple[float, float]:
    """Largest eps1 (to bisection accuracy) with sup_K |G - p| < tol; returns (eps1, slack)."""
    hi = start
    while True:
        try:
            slack = mollify(poly, hi, K).slack_on(K)
        except RegionOutsideHalfPlane:
            slack = math.inf
        if slack < tol:
            break
        hi /= 2
        if hi < 1e-12:
            raise ApproximationFailed("no eps1 meets the mollification tolerance")
    if hi == start:
        return hi, slack
    lo_fail = 2 * hi
    good, good_slack = hi, slack
    for _ in range(iterations):
        mid = 0.5 * (good + lo_fail)
        try:
            sl = mollify(poly, mid, K).slack_on(K)
        except RegionOutsideHalfPlane:
            sl = math.inf
        if sl < tol:
            good, good_slack = mid, sl
        else:
            lo_fail = mid
    return good, good_slack


# ---------------------------------------------------------------------------
# Bromwich inversion


def _contour_sum(G: MollifiedTarget, c: float, x: np.ndarray, M: int) -> np.ndarray:
    # parabola s(u) = c + mu (1 + iu)^2, trapezoid with step 3/M on [-3, 3]
    h = 3.0 / M
    u = h * np.arange(-M, M + 1)
    mu = np.pi * M / (12.0 * x)
    s = c + mu[:, None] * (1 + 1j * u[None, :]) ** 2
    ds = 2j * mu[:, None] * (1 + 1j * u[None, :])
    vals = np.exp(s * x[:, None]) * G(s) * ds
    return h * vals.sum(axis=1) / (2j * np.pi)


def inverse_laplace(G: MollifiedTarget, c: float, x, quad_tol: float = 1e-10,
                    method: str = "contour"):
    """g(x) = (1/2 pi i) int_{c - i inf}^{c + i inf} e^{sx} G(s) ds.

    ``method="contour"``: the line is deformed into a left-opening parabola
    through Re(s) > c (legal since G is analytic there apart from the pole at
    -1/eps1, which stays on the left); the trapezoid rule is doubled until two
    refinements agree to ``quad_tol`` (relative to max(1, max |g|)).

    ``method="line"``: the vertical line itself, truncated at |Im s| <= Y where
    the decay bound of G certifies the dropped part below quad_tol / 2.

    For x <= 0 the contour can be closed to the right and the value is 0.
    """
    if c <= G.pole:
        raise ValueError(f"abscissa c={c} must exceed the pole {G.pole}")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.zeros(len(x), dtype=complex)
    pos = x > 0
    if np.any(pos):
        if method == "contour":
            out[pos] = _invert_contour(G, c, x[pos], quad_tol)
        elif method == "line":
            out[pos] = np.array([_invert_line(G, c, xi, quad_tol) for xi in x[pos]])
        else:
            raise ValueError(f"unknown inversion method {method!r}")
    return complex(out[0]) if scalar else out


def _invert_contour(G, c, x, quad_tol, M0=16, M_max=96):
    # roundoff grows like e^{pi M / 12} while the discretization error falls like
    # e^{-2 pi M / 3}, so M is raised slowly and capped well before the two cross
    M = M0
    prev = _contour_sum(G, c, x, M)
    while M < M_max:
        M += max(8, M // 2)
        cur = _contour_sum(G, c, x, M)
        scale = max(1.0, float(np.max(np.abs(cur))))
        if np.max(np.abs(cur - prev)) < quad_tol * scale:
            return cur
        prev = cur
    raise QuadratureNotConverged(
        f"parabolic contour did not converge to {quad_tol:.3g} with {M_max} nodes")


def _line_integral(G, c, x, Y, width):
    panels = int(math.ceil(2 * Y / width))
    edges = np.linspace(-Y, Y, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1] - edges[0])
    total = 0.0 + 0.0j
    for i in range(0, panels, 4096):
        y = (mid[i:i + 4096, None] + half * _GL8_X[None, :]).ravel()
        w = np.tile(half * _GL8_W, len(mid[i:i + 4096]))
        s = c + 1j * y
        total += np.sum(w * np.exp(s * x) * G(s))
    return total / (2 * np.pi)


def _invert_line(G: MollifiedTarget, c, x, quad_tol, Y_max=1e6):
    decay = G.n - G.degree
    Y = max(10.0, 4.0 * abs(c))
    while True:
        M = G.decay_bound(Y, c)
        tail = M * Y ** (1 - decay) / ((decay - 1) * math.pi)
        if tail * math.exp(c * x) < quad_tol / 2:
            break
        Y *= 2
        if Y > Y_max:
            raise QuadratureNotConverged(
                f"line truncation needs |Im s| > {Y_max:.3g} for tolerance {quad_tol:.3g}")
    width = min(0.5 * math.pi / x, 0.25 * (c - G.pole), 1.0)
    coarse = _line_integral(G, c, x, Y, 2 * width)
    fine = _line_integral(G, c, x, Y, width)
    if abs(fine - coarse) > quad_tol / 2:
        raise QuadratureNotConverged("line quadrature panels too coarse")
    return fine


# ---------------------------------------------------------------------------
# truncation and forward transform


def residue_coefficients(G: MollifiedTarget) -> np.ndarray:
    """c_k with g(x) = e^{-x/eps1} sum_k c_k x^k for x > 0 (residue at the pole).

    Writing p(s) = sum_j q_j w^j with w = s + 1/eps1 gives
    G = eps1^-n sum_j q_j w^(j-n), and w^-m inverts to x^(m-1) e^{-x/eps1} / (m-1)!.
    """
    shift = np.polynomial.Polynomial([-1.0 / G.eps1, 1.0])
    q = np.polynomial.Polynomial(G.poly)(shift).coef.astype(complex)
    c = np.zeros(G.n, dtype=complex)
    for j, qj in enumerate(q):
        m = G.n - j
        c[m - 1] += qj / math.factorial(m - 1)
    return c / G.eps1 ** G.n


def residue_inverse(G: MollifiedTarget, x):
    """Exact inverse transform from the residue expansion (an oracle for the Bromwich routine)."""
    x = np.asarray(x, dtype=np.float64)
    c = residue_coefficients(G)
    val = np.exp(-x / G.eps1) * np.polynomial.polynomial.polyval(x, c)
    return np.where(x > 0, val, 0.0)


def _envelope_integral(G, lo, hi, sigma):
    """int_lo^hi e^{-(sigma + 1/eps1) x} sum_k |c_k| x^k dx, in closed form."""
    rate = sigma + 1.0 / G.eps1
    c = np.abs(residue_coefficients(G))
    total = 0.0
    for k, ck in enumerate(c):
        if ck == 0:
            continue
        a = k + 1
        upper = gammaincc(a, rate * lo) - (gammaincc(a, rate * hi) if math.isfinite(hi) else 0.0)
        total += ck * max(upper, 0.0) * math.exp(gammaln(a) - a * math.log(rate))
    return float(total)


def tail_mass(G: MollifiedTarget, B: float, sigma: float = 0.0) -> float:
    """Upper bound for int_B^inf |g(x)| e^{-sigma x} dx, requires sigma > -1/eps1."""
    if sigma <= G.pole:
        raise ValueError("tail mass diverges for sigma <= -1/eps1")
    return _envelope_integral(G, float(B), math.inf, sigma)


def head_mass(G: MollifiedTarget, A: float, sigma: float = 0.0) -> float:
    """Upper bound for int_0^A |g(x)| e^{-sigma x} dx."""
    if sigma <= G.pole:
        raise ValueError("head mass needs sigma > -1/eps1")
    return _envelope_integral(G, 0.0, float(A), sigma)


class Truncation(NamedTuple):
    A: float
    B: float
    table: KernelTable
    error: float


def truncate_support(G: MollifiedTarget, K: CompactRegion, tol: float, c: float = 0.0,
                     points: int = DEFAULT_POINTS, quad_tol: float | None = None,
                     max_points: int = 2**18 + 1) -> Truncation:
    """Pick [A, B] so that int_A^B g e^{-sx} dx is within tol of G on K.

    B doubles and A halves from a bracket around the peak of |g| until the
    certified bound on each neglected mass is below tol/4; the table is then refined until the measured
    sup error on K is below tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    sigma = K.min_real()
    if sigma <= G.pole:
        raise RegionOutsideHalfPlane("K is not inside the half-plane of convergence")
    qt = quad_tol if quad_tol is not None else min(1e-10, tol * 1e-4)
    probe = np.geomspace(1e-3 * G.eps1, 40.0 * G.eps1 * G.n, 256)
    weight = np.abs(inverse_laplace(G, c, probe, qt)) * np.exp(-sigma * probe)
    peak = float(probe[int(np.argmax(weight))])
    B = 2.0 * peak
    for _ in range(60):
        if tail_mass(G, B, sigma) < tol / 4:
            break
        B *= 2
    else:
        raise TruncationFailed("right tail does not fall below tolerance")
    A = 0.5 * peak
    for _ in range(200):
        if head_mass(G, A, sigma) < tol / 4:
            break
        A /= 2
    else:
        raise TruncationFailed("left tail does not fall below tolerance")
    z = K.samples
    target = G(z)
    n = points
    while n <= max_points:
        xs = np.linspace(A, B, n)
        table = KernelTable(A, B, inverse_laplace(G, c, xs, qt), bounded=False)
        err = float(np.max(np.abs(forward_laplace(table, z, quad_tol=math.inf) - target)))
        if err < tol:
            return Truncation(A, B, table, err)
        n = 2 * n - 1
    raise TruncationFailed(f"sup error {err:.3g} above {tol:.3g} even with {max_points} points")


def _simpson(y, h, axis=-1):
    n = y.shape[axis]
    if n % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of samples")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return (h / 3.0) * np.tensordot(y, w, axes=([axis], [0]))


def forward_laplace(kt: KernelTable, s, quad_tol: float = 1e-8):
    """int_A^B g(x) e^{-sx} dx by composite Simpson on the table's grid.

    The error estimate compares against the same rule on every other sample
    (Richardson); it must stay below quad_tol.
    """
    s = np.asarray(s, dtype=complex)
    flat = s.ravel()
    xs, g, h = kt.xs, kt.samples, kt.grid_step
    out = np.empty(len(flat), dtype=complex)
    est = 0.0
    for i in range(0, len(flat), 32):
        E = np.exp(-np.outer(flat[i:i + 32], xs)) * g[None, :]
        fine = _simpson(E, h)
        out[i:i + 32] = fine
        if math.isfinite(quad_tol) and kt.n % 4 == 1 and kt.n >= 9:
            coarse = _simpson(E[:, ::2], 2 * h)
            est = max(est, float(np.max(np.abs(fine - coarse))) / 15.0)
    if est > quad_tol:
        raise QuadratureNotConverged(f"Simpson error estimate {est:.3g} above {quad_tol:.3g}")
    return complex(out[0]) if s.ndim == 0 else out.reshape(s.shape)


# ---------------------------------------------------------------------------
# full chain


@dataclass(frozen=True)
class LaplaceApproximation:
    fit: PolyFit
    mollified: MollifiedTarget
    truncation: Truncation
    slack_fit: float
    slack_mollify: float
    slack_truncate: float
    total_error: float
    epsilon: float

    @property
    def passed(self) -> bool:
        third = self.epsilon / 3
        return (self.slack_fit < third and self.slack_mollify < third
                and self.slack_truncate < third and self.total_error < self.epsilon)


def laplace_approximation(f: Callable | TargetFunction, K: CompactRegion, epsilon: float,
                          max_degree: int = 12, eps1: float | None = None, c: float = 0.0,
                          points: int = DEFAULT_POINTS) -> LaplaceApproximation:
    """Polynomial fit, mollification and truncation, each held to epsilon/3."""
    third = epsilon / 3
    fit = fit_polynomial(f, K, max_degree, third)
    if eps1 is None:
        eps1, _ = choose_eps1(fit.coefficients, K, third)
    G = mollify(fit.coefficients, eps1, K)
    trunc = truncate_support(G, K, third, c=c, points=points)
    z = K.samples
    total = float(np.max(np.abs(forward_laplace(trunc.table, z, quad_tol=math.inf) - f(z))))
    return LaplaceApproximation(fit, G, trunc, fit.sup_error, G.slack_on(K), trunc.error,
                                total, epsilon)

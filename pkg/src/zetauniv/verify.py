"""Measured slacks for every inequality used in the construction.

Sups over K are maxima over K's sample grid. Each report also states a
continuity margin (a Lipschitz estimate times the sample mesh) so it is clear
what the grid maximum does and does not certify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EpsilonOutOfRange, InconsistentInputs, TailNotCertified
from .euler import (
    CoefficientTable,
    TableSums,
    ThresholdSet,
    quadratic_tail_sum,
    scan_table,
    tail_radius,
)
from .kernel import KernelTable
from .primes import alternating_tail_bound
from .regions import CompactRegion

SLACK_NAMES = ("we1", "we2", "we3", "we4", "we5", "we6", "aj")


@dataclass(frozen=True)
class BudgetReport:
    epsilon: float
    slack_we1: float
    slack_we2: float
    slack_we3: float
    slack_we4: float
    slack_we5: float
    slack_we6: float
    slack_aj: float
    final_supnorm: float
    tail_radius: float
    lipschitz: float
    continuity_margin: float
    details: dict = field(default_factory=dict)

    @property
    def budget(self) -> float:
        return self.epsilon / 7

    @property
    def slacks(self) -> dict:
        return {k: getattr(self, f"slack_{k}") for k in SLACK_NAMES}

    @property
    def passes(self) -> dict:
        return {k: v < self.budget for k, v in self.slacks.items()}

    @property
    def triangle_bound(self) -> float:
        return sum(self.slacks.values()) + self.tail_radius

    @property
    def triangle_ok(self) -> bool:
        return self.final_supnorm <= self.triangle_bound + 1e-12

    @property
    def passed(self) -> bool:
        return all(self.passes.values()) and self.final_supnorm < self.epsilon and self.triangle_ok

    def rows(self) -> list[dict]:
        out = [{"entry": k, "slack": v, "budget": self.budget, "pass": v < self.budget}
               for k, v in self.slacks.items()]
        out.append({"entry": "final_supnorm", "slack": self.final_supnorm,
                    "budget": self.epsilon, "pass": self.final_supnorm < self.epsilon})
        return out


def _check_consistent(table: CoefficientTable, gt: KernelTable, ts: ThresholdSet):
    problems = []
    if table.delta != ts.delta:
        problems.append(f"table delta {table.delta} != thresholds delta {ts.delta}")
    if table.markers != (ts.P0, ts.P1, ts.P2, ts.P3):
        problems.append("table thresholds differ from the threshold set")
    if (gt.A, gt.B) != (ts.A, ts.B):
        problems.append(f"kernel support [{gt.A}, {gt.B}] != [{ts.A}, {ts.B}]")
    if problems:
        raise InconsistentInputs("; ".join(problems))


def _sums_for(table, gt, ts, K, sums, **kw) -> TableSums:
    zs = K.scaled(ts.delta)
    if sums is None:
        return scan_table(table, gt, zs, **kw)
    if len(sums.zs) != len(zs) or np.max(np.abs(sums.zs - zs)) > 0:
        raise InconsistentInputs("precomputed sums were taken on different points")
    return sums


def lipschitz_estimate(values: np.ndarray, K: CompactRegion, safety: float = 2.0) -> float:
    """Largest difference quotient between nearby samples, times ``safety``."""
    z = K.samples
    if len(z) < 2:
        return 0.0
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, np.inf)
    near = d <= 2.01 * K.spacing
    dv = np.abs(values[:, None] - values[None, :])
    q = np.where(near, dv / np.where(near, d, 1.0), 0.0)
    return safety * float(np.max(q))


def budget_report(table: CoefficientTable, gt: KernelTable, ts: ThresholdSet, f,
                  K: CompactRegion, sums: TableSums | None = None,
                  lipschitz: float | None = None) -> BudgetReport:
    """Measure the seven budget slacks on the samples of K."""
    _check_consistent(table, gt, ts)
    if ts.epsilon is None:
        raise InconsistentInputs("threshold set carries no epsilon")
    S = _sums_for(table, gt, ts, K, sums)
    s = K.samples
    zs = S.zs
    C = complex(ts.C)
    fs = np.asarray(f(s), dtype=complex)
    Gs = gt.transform(s)
    sigma = float(np.min(zs.real))

    we1 = float(np.max(np.abs(Gs - fs + C)))
    we2 = quadratic_tail_sum(ts.P0, sigma, explicit_to=2**22)
    we3 = abs(S.head_log_1 + C)
    we4 = float(np.max(np.abs(S.head_log_1 - S.head_log_z)))
    we5 = float(np.max(np.abs(S.lin_ker - Gs)))
    beyond = alternating_tail_bound(zs, ts.P3)
    mid = float(np.max(np.abs(S.lin_mid)))
    we6 = max(mid, float(np.max(beyond)))
    box = S.alt_box
    if box is None or not np.all(np.isfinite(box)):
        diam = np.zeros(len(zs))
    else:
        diam = np.hypot(box[1] - box[0], box[3] - box[2])
    aj = float(np.max(diam + beyond))

    rad = tail_radius(table, zs)
    resid = np.abs(S.h_values() - fs)
    final = float(np.max(resid + rad))
    L = lipschitz_estimate(S.h_values() - fs, K) if lipschitz is None else float(lipschitz)
    return BudgetReport(
        ts.epsilon, we1, we2, we3, we4, we5, we6, aj, final, float(np.max(rad)), L, L * K.mesh,
        details={"we6_mid": mid, "we6_tail": float(np.max(beyond)), "lipschitz_source":
                 "estimated" if lipschitz is None else "user", "prime_counts": dict(S.counts)})


def partial_integration_check(table: CoefficientTable, gt: KernelTable, ts: ThresholdSet, s,
                              mode: str = "exact", sums: TableSums | None = None,
                              grid: int = 4097) -> float:
    """|LHS - RHS| of the partial-integration identity at s.

    LHS = sum_{P2 <= p < P3} a_p p^{-1-delta s} - int_A^B g~ e^{-sx} dx.
    RHS = Lambda(B) e^{-Bs} - Lambda(A) e^{-As} + s int_A^B Lambda e^{-sx} dx.

    ``mode="exact"`` integrates the step function of prime sums panel by panel
    and the kernel part in closed form; ``mode="grid"`` uses the trapezoid rule
    on Lambda sampled at ``grid`` points, whose error shrinks with the grid.
    """
    _check_consistent(table, gt, ts)
    s = complex(s)
    if mode not in ("exact", "grid"):
        raise ValueError(f"unknown mode {mode!r}")
    need_grid = mode == "grid"
    ok = (sums is not None and sums.thr_s is not None and np.any(sums.thr_s == s)
          and (not need_grid or len(sums.lam_xs) == grid))
    if not ok:
        sums = scan_table(table, gt, None, lambda_grid=grid if need_grid else None, thr_s=[s])
    i = int(np.nonzero(sums.thr_s == s)[0][0])
    lhs = sums.thr_lhs[i] - complex(gt.transform(s))
    lam_B = sums.lam_total - gt.total_integral
    lam_A = 0.0
    if mode == "exact":
        integral = sums.thr_step[i] - complex(gt.moment_transform(s))
    else:
        integral = np.trapezoid(sums.lam_values * np.exp(-s * sums.lam_xs), sums.lam_xs)
    rhs = lam_B * np.exp(-gt.B * s) - lam_A * np.exp(-gt.A * s) + s * integral
    return float(abs(lhs - rhs))


def final_supnorm(table: CoefficientTable, f, K: CompactRegion, ts: ThresholdSet,
                  tail_tol: float = 1e-6, sums: TableSums | None = None) -> float:
    """max over K of |h(1 + delta s) - f(s)| plus the certified tail radius."""
    zs = K.scaled(ts.delta)
    if np.min(zs.real) < 0.75:
        raise ValueError("need Re(1 + delta s) >= 3/4 on K")
    rad = tail_radius(table, zs)
    if np.max(rad) > tail_tol:
        raise TailNotCertified(f"tail radius {float(np.max(rad)):.3g} above {tail_tol:.3g}")
    if sums is None:
        sums = scan_table(table, None, zs)
    fs = np.asarray(f(K.samples), dtype=complex)
    return float(np.max(np.abs(sums.h_values() - fs) + rad))


# ---------------------------------------------------------------------------
# constant-shift bookkeeping


@dataclass(frozen=True)
class ShiftBudget:
    epsilon: float
    C: complex
    f_max: float
    C0: float
    C_ok: bool
    ab1_slack: float
    ab1_budget: float
    Y_max: float
    chain_factor: float
    kernel_max: float | None = None
    kernel_scaled_max: float | None = None

    @property
    def ab1_ok(self) -> bool:
        return self.ab1_slack < self.ab1_budget

    @property
    def Y_ok(self) -> bool:
        return self.Y_max <= 1.25 * abs(self.C) * (1 + 1e-12)

    @property
    def kernel_ok(self) -> bool | None:
        """|C| must dominate max |x g(x)| so that g/C keeps |x g/C| <= 1."""
        if self.kernel_scaled_max is None:
            return None
        return abs(self.C) >= self.kernel_scaled_max

    @property
    def passed(self) -> bool:
        return self.C_ok and self.ab1_ok and self.Y_ok and self.chain_factor < self.epsilon


def constant_shift_budget(f, K: CompactRegion, C: complex, epsilon: float,
                          kernel: KernelTable | None = None) -> ShiftBudget:
    if not 0 < epsilon < 1:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1), got {epsilon}")
    C = complex(C)
    fs = np.asarray(f(K.samples), dtype=complex)
    fmax = float(np.max(np.abs(fs)))
    C0 = 1 + 4 * fmax / epsilon
    if C == 0:
        ab1 = math.inf
        budget = 0.0
    else:
        z = fs / C
        ab1 = float(np.max(np.abs(z + np.log1p(-z))))
        budget = epsilon / (6 * abs(C))
    Ymax = float(np.max(np.abs(fs - C)))
    chain = 1.5 * (1.25 * abs(C)) * (epsilon / (2 * abs(C))) if C != 0 else math.inf
    km = kms = None
    if kernel is not None:
        km = float(np.max(np.abs(kernel.samples)))
        kms = kernel.max_scaled
    return ShiftBudget(epsilon, C, fmax, C0, abs(C) >= C0, ab1, budget, Ymax, chain, km, kms)


def log_linear_gap(z):
    """|log(1 + z) - z| (bounded by 2|z|^2/3 for |z| < 1/4)."""
    z = np.asarray(z, dtype=complex)
    return np.abs(np.log1p(z) - z)


def exp_linear_gap(z):
    """|e^z - 1| (below 3|z|/2 for 0 < |z| <= 1/2)."""
    return np.abs(np.expm1(np.asarray(z, dtype=complex)))


def elementary_inequalities(n: int = 1000, seed: int = 0) -> dict:
    """Worst observed ratio of each elementary inequality to its bound on random z."""
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n))
    ang = rng.random(n) * 2 * np.pi
    z1 = 0.25 * r * np.exp(1j * ang) * (1 - 1e-12)
    z2 = 0.5 * np.maximum(r, 1e-9) * np.exp(1j * ang)
    return {
        "log_ratio": float(np.max(log_linear_gap(z1) / (2 * np.abs(z1) ** 2 / 3))),
        "exp_ratio": float(np.max(exp_linear_gap(z2) / (1.5 * np.abs(z2)))),
    }

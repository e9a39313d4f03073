import math

import numpy as np
import pytest

from zetauniv import euler, verify
from zetauniv.errors import EpsilonOutOfRange, InconsistentInputs, TailNotCertified
from zetauniv.kernel import KernelTable
from zetauniv.regions import CompactRegion, TargetFunction


@pytest.fixture(scope="module")
def report(fast):
    return verify.budget_report(fast.table, fast.gt, fast.ts, fast.f, fast.K, sums=fast.sums)


def test_report_entries(report):
    assert set(report.slacks) == {"we1", "we2", "we3", "we4", "we5", "we6", "aj"}
    assert report.budget == pytest.approx(0.1)
    assert report.passes == {k: v < 0.1 for k, v in report.slacks.items()}
    assert report.slack_we1 < 1e-12  # f is built from the same kernel transform


def test_head_slack_is_the_head_sum(fast, report):
    ts = fast.ts
    assert report.slack_we3 == pytest.approx(abs(euler.head_log_sum(ts.head_primes, ts.head_phases)))


def test_triangle_assembly_always_holds(report):
    assert report.triangle_ok
    assert report.final_supnorm <= report.triangle_bound


def test_rows_cover_all_entries(report):
    rows = report.rows()
    assert [r["entry"] for r in rows][-1] == "final_supnorm"
    assert len(rows) == 8


def test_report_recomputes_without_sums(fast, report):
    again = verify.budget_report(fast.table, fast.gt, fast.ts, fast.f, fast.K)
    assert again.slacks == report.slacks and again.final_supnorm == report.final_supnorm


def test_inconsistent_inputs(fast):
    other = KernelTable.from_function(lambda x: 0.5 / x, 1.0, 3.0)
    with pytest.raises(InconsistentInputs):
        verify.budget_report(fast.table, other, fast.ts, fast.f, fast.K)
    with pytest.raises(InconsistentInputs):
        verify.budget_report(fast.table, fast.gt, fast.ts, fast.f, CompactRegion.segment(0, 1, 5),
                             sums=fast.sums)


def test_zero_kernel_report():
    K = CompactRegion.segment(0, 1, 11)
    ts = euler.choose_thresholds(0.2, 1.0, 2.0, 0.0, 0.7, K)
    zero = KernelTable(1.0, 2.0, np.zeros(257))
    table = euler.assign_coefficients(ts, zero)
    rep = verify.budget_report(table, zero, ts, TargetFunction.zero(), K)
    assert rep.slack_we1 == 0
    # x_n = 0 gives a_p = +-i by parity: the kernel range is an alternating sum
    S = euler.scan_table(table, zero, K.scaled(0.2))
    assert rep.slack_we5 == pytest.approx(np.abs(S.lin_ker).max())
    assert rep.slack_we5 < 0.1


def test_single_point_region(fast):
    K = CompactRegion.point(0.0)
    rep = verify.budget_report(fast.table, fast.gt, fast.ts, fast.f, K)
    S = euler.scan_table(fast.table, fast.gt, K.scaled(0.2))
    resid = abs(S.h_values()[0] - fast.f(K.samples)[0])
    assert rep.final_supnorm == pytest.approx(resid + euler.tail_radius(fast.table, 1.0)[0])
    assert rep.lipschitz == 0


def test_partial_integration_at_zero(fast):
    r = verify.partial_integration_check(fast.table, fast.gt, fast.ts, 0j, sums=fast.sums)
    assert r < 1e-10


@pytest.mark.parametrize("s", [1j, 0.5 + 0.5j])
def test_partial_integration_identity(fast, s):
    assert verify.partial_integration_check(fast.table, fast.gt, fast.ts, s, sums=fast.sums) < 1e-7


def test_partial_integration_grid_refines(fast):
    grids = np.array([129, 513, 2049, 8193, 65537])
    res = [verify.partial_integration_check(fast.table, fast.gt, fast.ts, 1j, mode="grid", grid=g)
           for g in grids]
    # Lambda is a step function, so single refinements are noisy; the trend is what counts
    slope = np.polyfit(np.log(grids), np.log(res), 1)[0]
    assert slope < -0.5 and res[-1] < res[0] / 100
    with pytest.raises(ValueError):
        verify.partial_integration_check(fast.table, fast.gt, fast.ts, 1j, mode="spline")


def test_final_supnorm(fast, report):
    fin = verify.final_supnorm(fast.table, fast.f, fast.K, fast.ts, tail_tol=1e-3, sums=fast.sums)
    assert fin == pytest.approx(report.final_supnorm)
    with pytest.raises(TailNotCertified):
        verify.final_supnorm(fast.table, fast.f, fast.K, fast.ts, tail_tol=1e-9, sums=fast.sums)


def test_final_supnorm_trivial_table():
    # every region empty, only the parity tail from 2 on: the tail radius dominates
    gt = KernelTable(1.0, 2.0, np.zeros(9))
    table = euler.CoefficientTable("apdef", 1.0, 2, 2, 2, 2, gt)
    K = CompactRegion.point(1.0)
    ts = euler.ThresholdSet(1.0, 1.0, 2.0, 0, 2, 2, math.e, math.exp(2.0))
    fin = verify.final_supnorm(table, TargetFunction.zero(), K, ts, tail_tol=10.0)
    assert fin == pytest.approx(euler.tail_radius(table, 2.0)[0])


def test_supnorm_stable_under_refinement(fast, report):
    K2 = CompactRegion.segment(0, 1, 21)
    fin2 = verify.final_supnorm(fast.table, fast.f, K2, fast.ts, tail_tol=1e-3)
    assert fin2 >= report.final_supnorm - 1e-12
    assert fin2 <= report.final_supnorm + report.continuity_margin


def test_constant_shift_zero_target():
    K = CompactRegion.segment(0, 1, 11)
    sb = verify.constant_shift_budget(TargetFunction.zero(), K, -1.5, 0.6)
    assert sb.C0 == 1 and sb.C_ok and sb.ab1_slack == 0 and sb.passed


def test_constant_shift_linear_target():
    K = CompactRegion.segment(0, 1, 11)
    sb = verify.constant_shift_budget(lambda s: s, K, 9, 0.5)
    assert sb.C0 == pytest.approx(9.0) and sb.C_ok
    assert sb.chain_factor == pytest.approx(1.5 * 1.25 * 0.5 * 0.5)
    assert not verify.constant_shift_budget(lambda s: s, K, 8.9, 0.5).C_ok


def test_constant_shift_kernel_check():
    K = CompactRegion.segment(0, 1, 11)
    kt = KernelTable.from_function(lambda x: 1 / x, 1.0, 2.0)
    assert verify.constant_shift_budget(TargetFunction.zero(), K, 1.5, 0.5, kernel=kt).kernel_ok
    assert verify.constant_shift_budget(TargetFunction.zero(), K, -1.5, 0.5).kernel_ok is None


@pytest.mark.parametrize("eps", [0.0, 1.0, 2.0])
def test_epsilon_range(eps):
    with pytest.raises(EpsilonOutOfRange):
        verify.constant_shift_budget(TargetFunction.zero(), CompactRegion.point(), 2, eps)


def test_elementary_inequalities():
    assert verify.log_linear_gap(0.2) <= 2 * 0.2 ** 2 / 3
    assert 2 * 0.2 ** 2 / 3 == pytest.approx(0.02667, abs=1e-5)
    out = verify.elementary_inequalities(1000, seed=7)
    assert out["log_ratio"] <= 1 and out["exp_ratio"] < 1


def test_lipschitz_estimate_linear():
    K = CompactRegion.segment(0, 1, 11)
    assert verify.lipschitz_estimate(3 * K.samples, K, safety=1.0) == pytest.approx(3.0)

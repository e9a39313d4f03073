import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import zeta as hurwitz

from zetauniv import euler
from zetauniv.errors import (
    HeadSteeringFailed,
    KernelBoundViolated,
    SmoothingBudgetExceeded,
    TailNotCertified,
    ThresholdOrderViolated,
)
from zetauniv.kernel import KernelTable, inverse_kernel
from zetauniv.regions import CompactRegion


def _kadane(v):
    best = cur = 0.0
    for x in v:
        cur = max(0.0, cur + x)
        best = max(best, cur)
    return best


# -- thresholds and steering ----------------------------------------------


def test_threshold_formula(fast):
    ts = fast.ts
    assert ts.P2 == math.exp(5.0) and ts.P2 == pytest.approx(148.413, abs=1e-3)
    assert ts.P3 == pytest.approx(22026.466, abs=1e-3)
    assert ts.P0 <= ts.P1 <= ts.P2 <= ts.P3


def test_zero_constant_needs_no_steering(fast):
    ts = fast.ts
    assert ts.P1 == ts.P0
    n = np.arange(1, len(ts.head_primes) + 1)
    assert np.array_equal(ts.head_phases, euler.parity_phase(n))
    assert abs(euler.head_log_sum(ts.head_primes, ts.head_phases)) < ts.epsilon / 7


def test_threshold_set_guards():
    with pytest.raises(ValueError):
        euler.ThresholdSet(0.2, 1.0, 2.0, 0, 2, 3, 100.0, 22026.0)
    with pytest.raises(ThresholdOrderViolated):
        euler.ThresholdSet(0.2, 1.0, 2.0, 0, 500, 500, math.exp(5), math.exp(10))


def test_late_head_is_an_ordering_error():
    K = CompactRegion.segment(0, 1, 11)
    # a target of size 3 cannot be reached before e^(1/0.5)
    with pytest.raises((ThresholdOrderViolated, HeadSteeringFailed)):
        euler.choose_thresholds(0.5, 1.0, 2.0, -3.0, 0.7, K)


@pytest.mark.parametrize("C", [-1.0, -0.5, 0.4j, 0.3 - 0.3j])
def test_steering_reaches_target(C):
    hp, hph, P1 = euler.steer_head_coefficients(23, C, 0.7)
    # independent recomputation of the head sum
    S = sum(np.log(1 - np.exp(1j * f) / p) for p, f in zip(hp.tolist(), hph.tolist()))
    assert abs(S + C) < 0.1
    assert P1 > hp[-1]


def test_negative_real_target_steers_with_minus_one():
    hp, hph, _ = euler.steer_head_coefficients(23, -1.0, 0.7)
    steered = hph[hp >= 23]
    # r = S + C stays real negative, so every steered a_p is -1
    assert np.allclose(steered, math.pi)


def test_steering_monotone_in_target_size():
    P1s = [euler.steer_head_coefficients(23, -c, 0.7)[2] for c in (0.1, 0.25, 0.5, 1.0, 1.5)]
    assert P1s == sorted(P1s)


def test_steering_out_of_reach():
    with pytest.raises(HeadSteeringFailed):
        euler.steer_head_coefficients(23, 50.0, 0.7, pmax=1e4)


def test_quadratic_tail_certificate_dominates_sum():
    import sympy
    ps = np.array(list(sympy.primerange(50, 10**6)), dtype=float)
    r = ps ** -0.9
    partial = np.sum(-np.log1p(-r) - r)
    assert euler.quadratic_tail_sum(50, 0.9) >= partial
    assert euler.quadratic_tail_sum(50, 0.5) == math.inf


# -- coefficient rules ----------------------------------------------------


def test_zero_x_gives_plus_minus_i():
    ph = euler.apdef_phase(np.zeros(2), np.array([2, 3]))
    a = np.exp(1j * ph)
    assert np.allclose(a, [1j, -1j])


def test_unit_x_gives_one():
    ph = euler.apdef_phase(np.ones(2), np.array([4, 7]))
    assert np.allclose(np.exp(1j * ph), 1.0)


def test_apdef_rejects_large_x():
    with pytest.raises(KernelBoundViolated):
        euler.apdef_phase(np.array([1.01]), np.array([1]))


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0, 1), ang=st.floats(-math.pi, math.pi), n=st.integers(1, 10**9))
def test_pairing_identity(r, ang, n):
    x = r * complex(math.cos(ang), math.sin(ang))
    ph = euler.apdef_phase(np.array([x, x]), np.array([n, n + 1]))
    assert abs(np.exp(1j * ph).mean() - x) < 1e-12


def test_real_kernel_phases_are_symmetric(fast):
    # for a real non-negative kernel xi = 0, so the pair is exp(+-i theta)
    E = np.array(fast.table.entries(fast.ts.P2, 200))
    n, ph = E[:, 1], E[:, 2]
    theta = np.arccos(fast.table.x_values(E[:, 0]).real)
    assert np.allclose(np.exp(1j * ph), np.exp(1j * np.where(n % 2 == 0, theta, -theta)))


def test_region_labels(fast):
    t = fast.table
    lab = t.region_of([2, 23, 100, 149, 30000])
    assert lab.tolist() == ["head", "parity", "parity", "kernel", "tail"]


def test_parity_in_middle_range(fast):
    E = np.array(fast.table.entries(fast.ts.P1, fast.ts.P2))
    assert np.allclose(E[:, 2], np.where(E[:, 1] % 2 == 0, 0.0, math.pi))


def test_region_exactness_and_unimodularity(fast):
    p, n, ph = euler.sample_entries(fast.table, 10000, seed=3)
    assert len(p) == 10000
    again = euler.recompute_phases(fast.table, p, n)
    diff = np.abs(np.angle(np.exp(1j * (ph - again))))
    assert diff.max() < 1e-12
    assert np.all((ph >= 0) & (ph < 2 * math.pi))
    assert np.max(np.abs(np.abs(np.exp(1j * ph)) - 1)) < 1e-15


def test_averaging_property(fast):
    t = fast.table
    E = np.array(t.entries(t.P2, t.P3))
    p, ph = E[:, 0], E[:, 2]
    a = np.exp(1j * ph)
    x = t.x_values(p)
    c = np.abs((a[:-1] / p[:-1] + a[1:] / p[1:]) / 2 - x[:-1] / p[:-1]) * p[:-1] * np.log(p[:-1])
    # one constant serves the whole range: the late half is no worse than the early half
    assert c.max() < 1.0
    assert c[len(c) // 2:].max() <= c[: len(c) // 2].max()


def test_recursive_zero_kernel():
    K = CompactRegion.segment(0, 1, 11)
    ts = euler.choose_thresholds(0.2, 1.0, 2.0, 0.0, 0.7, K)
    zero = KernelTable(1.0, 2.0, np.zeros(65))
    rt = euler.assign_coefficients_recursive(ts, zero)
    E = np.array(rt.entries(ts.P2, ts.P3))
    p, ph = E[:, 0], E[:, 2]
    assert ph[0] == 0.0  # arg(0) = 0 on the first kernel prime
    run = np.abs(np.cumsum(np.exp(1j * ph) / p))
    assert run.max() <= 1 / p[0] * (1 + 1e-12)


def test_recursive_deficit_bound(fast):
    ts, kt = fast.ts, fast.kt
    E = np.array(fast.rtable.entries(ts.P2, ts.P3))
    p, a = E[:, 0], np.exp(1j * E[:, 2])
    I = kt.cumulative(ts.delta * np.log(p))
    carry = np.concatenate([[0], np.cumsum(a / p)])
    ref = max(np.abs(I - carry[:-1]).max(), np.abs(I - carry[1:]).max(),
              abs(kt.total_integral - carry[-1]))
    assert fast.rsums.lam_sup == pytest.approx(ref, rel=1e-12)
    inc = np.diff(np.concatenate([I, [kt.total_integral]])).real
    bound = 1 / ts.P2 + inc.max() + _kadane(np.diff(I).real - 1 / p[:-1])
    assert ref <= bound


def test_recursive_restart_matches_full_pass(fast):
    ts = fast.ts
    full = fast.rtable.entries(ts.P2, 5000)
    part = fast.rtable.entries(3000, 5000)
    assert part == [e for e in full if e[0] >= 3000]


def test_table_csv(fast, tmp_path):
    rows = fast.table.to_csv(tmp_path / "t.csv", 2, 200)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert rows == 46 and lines[0] == "p,n,phase" and lines[1].startswith("2,1,")


# -- Lambda profile -------------------------------------------------------


def test_lambda_starts_at_zero(fast):
    pr = euler.lambda_profile(fast.table, fast.gt, fast.ts, sums=fast.sums)
    assert pr.xs[0] == fast.ts.A and pr.values[0] == 0
    assert pr.sup_abs >= np.abs(pr.values).max()
    assert pr.fitted_C1 == pytest.approx(pr.sup_abs / 0.2)


def test_lambda_profile_matches_definition(fast):
    pr = euler.lambda_profile(fast.table, fast.gt, fast.ts, sums=fast.sums)
    E = np.array(fast.table.entries(fast.ts.P2, fast.ts.P3))
    lp = 0.2 * np.log(E[:, 0])
    a = np.exp(1j * E[:, 2]) / E[:, 0]
    for x, v in list(zip(pr.xs, pr.values))[::32]:
        ref = a[lp < x].sum() - fast.gt.cumulative(x)
        assert abs(v - ref) < 1e-12


def test_fit_C1():
    mk = lambda d, s: euler.LambdaProfile(d, np.zeros(1), np.zeros(1), s, s / d)
    fit = euler.fit_C1([mk(0.2, 0.02), mk(0.1, 0.012)])
    assert fit["C1"] == pytest.approx(0.12)


# -- smoothing ------------------------------------------------------------


def test_smoothing_keeps_smooth_kernel():
    kt = KernelTable.from_function(inverse_kernel, 1.0, 2.0)
    gt = euler.smooth_kernel(kt, 0.05)
    # u = x g = 1 is constant, so averaging changes nothing
    assert np.max(np.abs(gt.samples - kt.samples)) < 1e-15
    assert gt.smoothed


def test_smoothing_step_function():
    step = lambda x: np.where(x < 1.5, 1 / x, 0.0)
    kt = KernelTable.from_function(step, 1.0, 2.0, points=1025)
    gt = euler.smooth_kernel(kt, 0.1)
    assert gt.max_scaled <= 1.0
    assert np.max(np.abs(np.diff(gt.u))) < 0.1 * np.max(np.abs(np.diff(kt.u)))
    # away from the jump nothing moves
    far = np.abs(kt.xs - 1.5) > 0.1
    assert np.max(np.abs(gt.u - kt.u)[far]) < 1e-12


def test_smoothing_width_to_zero():
    step = lambda x: np.where(x < 1.5, 1 / x, 0.0)
    kt = KernelTable.from_function(step, 1.0, 2.0, points=1025)
    errs = [np.abs(euler.smooth_kernel(kt, w).value(1.3) - 1 / 1.3) for w in (0.2, 0.05, 0.0)]
    assert errs[-1] < 1e-15 and errs[0] >= errs[1] >= errs[2]


def test_smoothing_budget():
    K = CompactRegion.segment(0, 1, 5)
    step = lambda x: np.where(x < 1.5, 1 / x, 0.0)
    kt = KernelTable.from_function(step, 1.0, 2.0, points=1025)
    with pytest.raises(SmoothingBudgetExceeded):
        euler.smooth_kernel(kt, 0.9, K, epsilon=1e-4)
    gt = euler.smooth_kernel(kt, 0.01, K, epsilon=0.7)
    assert gt.smoothing_slack < 0.1


# -- Euler products -------------------------------------------------------


@pytest.fixture(scope="module")
def uniform_table():
    return euler.CoefficientTable.uniform(1e6)


def test_log_zeta_two(uniform_table):
    v, rad = euler.euler_product_log(uniform_table, 2.0, tail_tol=1e-5)
    assert abs(v - math.log(math.pi ** 2 / 6)) <= rad


def test_log_zeta_three(uniform_table):
    v, rad = euler.euler_product_log(uniform_table, 3.0, tail_tol=1e-8)
    assert abs(v - math.log(hurwitz(3.0, 1.0))) < 1e-8
    assert rad < 1e-8


def test_tail_not_certified(uniform_table):
    with pytest.raises(TailNotCertified):
        euler.euler_product_log(uniform_table, 1.2, tail_tol=1e-8)
    with pytest.raises(TailNotCertified):
        euler.euler_product_log(uniform_table, 0.7)


def test_parity_tail_shrinks_with_cutoff(fast):
    s = np.array([0.6 + 0j, 0.6 + 5j])
    radii = []
    for P3 in (1e4, 1e6, 1e8):
        t = euler.CoefficientTable("apdef", 0.2, 23, 23, 148.0, P3, fast.gt)
        radii.append(euler.tail_radius(t, s).max())
    assert radii[0] > radii[1] > radii[2]
    t = euler.CoefficientTable("apdef", 0.2, 23, 23, 148.0, 2e4, fast.gt)
    with pytest.raises(TailNotCertified):
        euler.euler_product_log(t, 0.6, margin=0.05, tail_tol=1e-3)


def test_product_matches_streaming_sums(fast):
    v, rad = euler.euler_product_log(fast.table, fast.zs, tail_tol=1e-2)
    assert np.max(np.abs(v - fast.sums.h_values())) < 1e-11
    assert np.all(rad == euler.tail_radius(fast.table, fast.zs))

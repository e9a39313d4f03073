"""Shared construction fixtures.

The construction with kernel min(1, 1/x) on [1, 2], C = 0, K = [0, 1] and
epsilon = 0.7 is built once per delta and reused. delta = 0.2 is cheap
(primes below e^10) and used by the unit tests; delta = 0.1 sieves to e^20
and is only pulled in by the acceptance gate.
"""

import sys
from functools import lru_cache
from types import SimpleNamespace

import pytest

from zetauniv import euler
from zetauniv.kernel import KernelTable, inverse_kernel
from zetauniv.regions import CompactRegion, TargetFunction

EPSILON = 0.7
CHECK_POINTS = (0j, 1j, 0.5 + 0.5j)


@lru_cache(maxsize=None)
def scenario(delta: float, with_recursive: bool = True) -> SimpleNamespace:
    K = CompactRegion.segment(0, 1, 11)
    kt = KernelTable.from_function(inverse_kernel, 1.0, 2.0)
    gt = euler.smooth_kernel(kt, 0.0, K, EPSILON)
    f = TargetFunction.laplace_form(gt, 0.0)
    ts = euler.choose_thresholds(delta, 1.0, 2.0, 0.0, EPSILON, K)
    zs = K.scaled(delta)
    table = euler.assign_coefficients(ts, gt)
    sums = euler.scan_table(table, gt, zs, lambda_grid=257, thr_s=list(CHECK_POINTS))
    ns = SimpleNamespace(delta=delta, K=K, kt=kt, gt=gt, f=f, ts=ts, zs=zs,
                         table=table, sums=sums, rtable=None, rsums=None)
    if with_recursive:
        ns.rtable = euler.assign_coefficients_recursive(ts, kt)
        ns.rsums = euler.scan_table(ns.rtable, kt, zs, lambda_grid=257)
    return ns


@pytest.fixture(scope="session")
def fast():
    return scenario(0.2)


@pytest.fixture(scope="session")
def scenario1():
    return scenario(0.1)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

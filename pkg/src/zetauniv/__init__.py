"""Numerical experiments around universality of the Riemann zeta function on Re(s) = 1.

Modules:
    primes   segmented sieve, prime sums with exact indices
    zeta     zeta and branch-tracked log zeta near the 1-line
    laplace  polynomial fit, mollified Laplace transforms, Bromwich inversion
    euler    twisted Euler products and their coefficient tables
    verify   measured slacks of every inequality in the construction
    scan     densities of good shifts and window maxima along the 1-line
    cli      the ``zetauniv`` command
"""

from .errors import ZetaUnivError
from .kernel import KernelTable, inverse_kernel
from .regions import CompactRegion, TargetFunction
from .zeta import ZetaConfig, log_zeta_tracked, zeta

__all__ = [
    "CompactRegion",
    "KernelTable",
    "TargetFunction",
    "ZetaConfig",
    "ZetaUnivError",
    "inverse_kernel",
    "log_zeta_tracked",
    "zeta",
]
__version__ = "0.1.0"

"""Exception hierarchy shared by all modules."""


class ZetaUnivError(Exception):
    """Base class; every error carries the module that raised it."""

    module = "zetauniv"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class FeasibilityExceeded(ZetaUnivError):
    module = "primes"


class PoleAtOne(ZetaUnivError):
    module = "zeta_engine"


class HeightBudgetExceeded(ZetaUnivError):
    module = "zeta_engine"


class ToleranceNotReached(ZetaUnivError):
    module = "zeta_engine"


class BranchTrackingFailed(ZetaUnivError):
    module = "zeta_engine"


class ApproximationFailed(ZetaUnivError):
    module = "laplace_pipeline"

    def __init__(self, message, achieved_error=None, degree=None):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.degree = degree


class RegionOutsideHalfPlane(ZetaUnivError):
    module = "laplace_pipeline"


class QuadratureNotConverged(ZetaUnivError):
    module = "laplace_pipeline"


class TruncationFailed(ZetaUnivError):
    module = "laplace_pipeline"


class KernelBoundViolated(ZetaUnivError):
    module = "euler_constructor"


class SmoothingBudgetExceeded(ZetaUnivError):
    module = "euler_constructor"


class HeadSteeringFailed(ZetaUnivError):
    module = "euler_constructor"


class ThresholdOrderViolated(ZetaUnivError):
    module = "euler_constructor"


class TailNotCertified(ZetaUnivError):
    module = "euler_constructor"


class InconsistentInputs(ZetaUnivError):
    module = "verifier"


class EpsilonOutOfRange(ZetaUnivError):
    module = "verifier"


class ParseError(ZetaUnivError):
    module = "cli_report"

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        if loc:
            message = f"{', '.join(loc)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(ZetaUnivError):
    module = "cli_report"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

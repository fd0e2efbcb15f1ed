"""Exception hierarchy shared by the package."""


class OnlineNewtonError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrix(OnlineNewtonError, ArithmeticError):
    """A symmetric factorization met a pivot below the singularity cutoff."""


class SingularHessian(SingularMatrix):
    """The Newton system at round ``t`` could not be solved."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SensorCoincidence(OnlineNewtonError, ValueError):
    """The localization loss was queried on top of a sensor."""


class DerivativeMismatch(OnlineNewtonError, AssertionError):
    """Analytic derivatives disagree with finite differences."""

    def __init__(self, kind, index, analytic, numeric, tolerance):
        self.kind = kind
        self.index = index
        self.analytic = analytic
        self.numeric = numeric
        self.tolerance = tolerance
        super().__init__(
            f"{kind} component {index}: analytic {analytic!r} vs "
            f"finite difference {numeric!r} (tol {tolerance:.3g})"
        )


class DegenerateOptimum(OnlineNewtonError, ValueError):
    """A round optimum has a (numerically) singular Hessian."""


class NoInteriorMinimum(OnlineNewtonError, ValueError):
    """The best grid point of a brute-force scan lies on the box boundary."""


class PolishFailed(OnlineNewtonError, ArithmeticError):
    """Newton polishing did not reach a stationary point."""


class NoRealFixedPoint(OnlineNewtonError, ValueError):
    """The quadratic map x -> c x^2 + v has no real fixed point (4cv > 1)."""


class AssumptionViolated(OnlineNewtonError, ValueError):
    """A regret-bound assumption fails numerically."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("assumption(s) violated: " + "; ".join(self.failures))


class ConditionFailed(OnlineNewtonError, ValueError):
    """The constant-regret corollary's preconditions do not hold."""


class ConfigError(OnlineNewtonError, ValueError):
    """An experiment configuration failed to parse or validate."""

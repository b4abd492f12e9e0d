"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`NumericalFailure`, so callers that only care about "the computation
could not be certified" can catch one class.  Input problems derive from
:class:`ValueError` as well, matching the usual numpy/scikit-learn habit.
"""


class WeylStripError(Exception):
    """Base class for all library errors."""


class NumericalFailure(WeylStripError):
    """A computation could not be completed to its stated contract."""


class ConfigError(WeylStripError, ValueError):
    """Invalid experiment configuration."""


# matrix kernel
class NotHermitian(NumericalFailure, ValueError):
    pass


class NegativeEigenvalue(NumericalFailure, ValueError):
    pass


class Overflow(NumericalFailure):
    pass


class DimensionMismatch(WeylStripError, ValueError):
    pass


# propagation
class EvalOutOfRange(WeylStripError, ValueError):
    pass


class MissingDerivative(WeylStripError, ValueError):
    pass


class OverflowGuard(NumericalFailure):
    pass


class StepFailure(NumericalFailure):
    pass


# linear-fractional maps and disks
class SingularDenominator(NumericalFailure):
    pass


class NotNegativeDefinite(NumericalFailure):
    pass


class SingularX2(NumericalFailure):
    pass


class SingularBlock(NumericalFailure):
    pass


class SingularTrailingBlock(NumericalFailure):
    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"trailing {k}x{k} block is singular")


class BadK(WeylStripError, ValueError):
    pass


# jets
class OrderUnderflow(WeylStripError, ValueError):
    pass


class InsufficientOrder(WeylStripError, ValueError):
    pass


class OutsideTrustRadius(WeylStripError, ValueError):
    pass


# pde lab
class Instability(NumericalFailure):
    pass


class BadConfig(WeylStripError, ValueError):
    pass


class BoundViolation(WeylStripError, ValueError):
    pass

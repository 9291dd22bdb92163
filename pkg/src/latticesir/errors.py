"""Exception types raised by latticesir."""


class LatticeSIRError(Exception):
    """Base class for all errors raised by this package."""


class KernelError(LatticeSIRError, ValueError):
    pass


class NonUnitMass(KernelError):
    pass


class NegativeWeight(KernelError):
    pass


class ZeroOffset(KernelError):
    pass


class AsymmetricKernel(KernelError):
    """Raised when an asymmetric kernel is built without the explicit bypass."""


class UnsupportedDimension(KernelError):
    pass


class DegenerateTruncation(KernelError):
    pass


class DimensionMismatch(LatticeSIRError, ValueError):
    pass


class EmptyGrid(LatticeSIRError, ValueError):
    pass


class InsufficientPoints(LatticeSIRError, ValueError):
    pass


class TorusSaturated(LatticeSIRError):
    """The finite torus is too small for the requested time range."""


class ZeroMobility(LatticeSIRError, ValueError):
    pass


class ZeroRecovery(LatticeSIRError, ValueError):
    pass


class NegativeTime(LatticeSIRError, ValueError):
    pass


class ZeroSeparation(LatticeSIRError, ValueError):
    pass


class IntegratorFailure(LatticeSIRError, RuntimeError):
    pass


class QuadratureStall(LatticeSIRError, RuntimeError):
    pass


class SystemTooLarge(LatticeSIRError, ValueError):
    pass


class VanishingMean(LatticeSIRError, ArithmeticError):
    pass


class NonIntegerDensity(LatticeSIRError, ValueError):
    pass


class Extinct(LatticeSIRError):
    """No event has positive rate."""


class EventBudgetExceeded(LatticeSIRError, RuntimeError):
    pass


class ConfigParseError(LatticeSIRError):
    exit_code = 2


class ConfigValidationError(LatticeSIRError, ValueError):
    exit_code = 3

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")

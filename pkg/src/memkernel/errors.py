"""Exception and warning types raised across the package."""


class MemKernelError(ValueError):
    """Base class for all construction and validation failures."""


class NotCompletelyPositive(MemKernelError):
    pass


class NotAChannel(MemKernelError):
    pass


class NormalizationMismatch(MemKernelError):
    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class TraceMismatch(NormalizationMismatch):
    pass


class NotPSD(MemKernelError):
    pass


class SingularLaplace(MemKernelError):
    pass


class SingularResolvent(MemKernelError):
    pass


class SingularNormalization(MemKernelError):
    pass


class BudgetViolation(MemKernelError):
    pass


class StepTooLarge(MemKernelError):
    pass


class Diverging(MemKernelError):
    pass


class ContourEvaluationFailure(MemKernelError):
    pass


class HorizonTooShort(MemKernelError):
    pass


class DimensionCap(MemKernelError):
    pass


class KernelUnavailable(MemKernelError):
    """The requested time-domain form does not exist for this family pair."""


class GainViolation(UserWarning):
    """The gain condition -dN/dt^# I >= 0 failed at some sampled time."""


class NotDissipative(UserWarning):
    """An operator X with X + X^dagger not <= 0 was supplied."""

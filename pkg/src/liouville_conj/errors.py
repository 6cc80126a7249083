"""Exception hierarchy shared by all modules."""


class LiouvilleError(Exception):
    """Base class for all library errors."""


class NonMonotoneSpectrum(LiouvilleError):
    pass


class NonPositiveProfile(LiouvilleError):
    pass


class ConditionViolated(LiouvilleError):
    """Monotonicity condition failed; the offending spec is attached."""

    def __init__(self, message, spec=None):
        super().__init__(message)
        self.spec = spec


class QuadratureFailure(LiouvilleError):
    pass


class DegenerateMetric(LiouvilleError):
    pass


class WrongProfile(LiouvilleError):
    pass


class ComplexRoots(LiouvilleError):
    pass


class DegenerateInterval(LiouvilleError):
    pass


class SingularInterior(LiouvilleError):
    pass


class FDUnstable(LiouvilleError):
    pass


class NearTurningPoint(LiouvilleError):
    pass


class ConservationBreach(LiouvilleError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BranchLocusHit(LiouvilleError):
    pass


class FrameDegenerate(LiouvilleError):
    pass


class DoubleZeroSuspected(LiouvilleError):
    pass


class NotReached(LiouvilleError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoCommonZero(LiouvilleError):
    pass


class NotApplicable(LiouvilleError):
    pass


class InconclusiveFit(LiouvilleError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SignatureFailed(LiouvilleError):
    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = evidence or {}


class AmbiguousCount(LiouvilleError):
    pass


class UnsupportedDimension(LiouvilleError):
    pass

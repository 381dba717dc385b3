"""Exception and warning classes raised across the package."""


class MMSBError(ValueError):
    """Base class for all package errors."""


class NonPositiveAlpha(MMSBError):
    pass


class InvalidPrior(MMSBError):
    pass


class InvalidProbability(MMSBError):
    pass


class DimensionMismatch(MMSBError):
    pass


class TooFewNodes(MMSBError):
    pass


class OverlappingSets(MMSBError):
    pass


class EmptyPartition(MMSBError):
    pass


class CapExceeded(MMSBError):
    pass


class RankDeficient(MMSBError):
    pass


class NotUnitVector(MMSBError):
    pass


class NoInitializers(MMSBError):
    pass


class NonFiniteIterate(MMSBError):
    pass


class NonPositiveEigenvalue(MMSBError):
    pass


class DegenerateSeparation(MMSBError):
    pass


class EmptyCommunity(MMSBError):
    pass


class UnknownPreset(MMSBError):
    pass


class AmbiguousAlignment(UserWarning):
    """Two candidate label matchings scored within 1e-9 of each other."""


class NotHomophilic(UserWarning):
    """Estimated within-community rate does not exceed the across rate."""


class AssumptionWarning(UserWarning):
    """One or more sufficient conditions for recovery are not met."""

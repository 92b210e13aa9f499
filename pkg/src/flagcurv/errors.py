"""Exception hierarchy shared by all flagcurv modules."""


class FlagcurvError(Exception):
    """Base class for all library errors."""


class InputError(FlagcurvError, ValueError):
    """Malformed argument: wrong shape, zero vector where forbidden, ..."""


class AlgebraError(FlagcurvError):
    """A Lie algebra failed validation or could not be loaded."""


class DomainError(InputError):
    pass


class ConvexityError(FlagcurvError):
    """A fundamental tensor is not positive definite."""

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = float(eigenvalue)


class InvalidDatumError(FlagcurvError):
    """Navigation datum with base(W) >= 1."""


class PartitionError(FlagcurvError):
    pass


class DegenerateFlagError(FlagcurvError):
    """Flag pole and edge (or a spanning pair) are linearly dependent."""


class SearchFailure(FlagcurvError):
    pass


class HypothesisViolation(FlagcurvError):
    """The algebra is abelian or has a center of dimension > 1."""


class CoveringFailure(FlagcurvError):
    pass


class DeltaSearchFailure(FlagcurvError):
    pass


class RegionAssignmentError(FlagcurvError):
    pass


class EpsilonTooLarge(FlagcurvError):
    def __init__(self, message, margin):
        super().__init__(message)
        self.margin = float(margin)


class EuclideanFactorError(FlagcurvError):
    """ad(w1) vanishes on the transverse slice of m."""


class NotSubalgebraError(FlagcurvError):
    pass

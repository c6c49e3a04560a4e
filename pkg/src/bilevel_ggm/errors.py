"""Exception and warning types raised by the library."""


class BilevelGGMError(Exception):
    """Base class for all library errors."""


class NonFiniteInput(BilevelGGMError, ValueError):
    pass


class DimensionTooSmall(BilevelGGMError, ValueError):
    pass


class DimensionMismatch(BilevelGGMError, ValueError):
    pass


class NotSymmetric(BilevelGGMError, ValueError):
    pass


class NotPositiveDefinite(BilevelGGMError, ValueError):
    pass


class SingularSample(BilevelGGMError, ValueError):
    """Sample covariance is singular where an unpenalized inverse is needed."""


class InvalidLambda(BilevelGGMError, ValueError):
    pass


class UnequalSampleSizes(BilevelGGMError, ValueError):
    pass


class EmptyFeasibleGrid(BilevelGGMError, ValueError):
    pass


class DegenerateGraph(BilevelGGMError, ValueError):
    pass


class InvalidConfig(BilevelGGMError, ValueError):
    pass


class MissingTruth(BilevelGGMError, FileNotFoundError):
    pass


class ConvergenceWarning(UserWarning):
    """A solver hit its iteration cap; the best iterate is returned."""

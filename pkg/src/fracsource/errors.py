"""Exception and warning types raised across the package."""


class FracSourceError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FracSourceError, ValueError):
    pass


class InvalidOrder(InvalidArgument):
    """Fractional order outside the supported range."""


class NonConvergent(FracSourceError, ArithmeticError):
    """A Mittag-Leffler evaluation was requested outside the supported region."""


class AssumptionViolated(FracSourceError, ValueError):
    pass


class BracketFailure(FracSourceError, RuntimeError):
    """No sign change of the characteristic function in a predicted bracket."""


class ExcludedIndex(FracSourceError, IndexError):
    pass


class DiagonalDegenerate(FracSourceError, ArithmeticError):
    """Diagonal coefficient of a product-integration step is (almost) zero."""


class DataIncompatible(FracSourceError, ValueError):
    pass


class DenominatorTooSmall(FracSourceError, ArithmeticError):
    pass


class SingularStep(FracSourceError, ArithmeticError):
    pass


class ConfigError(FracSourceError, ValueError):
    pass


class TruncationWarning(UserWarning):
    """The last retained term of a mode series is larger than requested."""


class AssumptionWarning(UserWarning):
    """A data function only approximately satisfies the solvability conditions."""

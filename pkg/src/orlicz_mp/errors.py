"""Exception hierarchy shared by every module of the package."""


class OrliczError(Exception):
    """Base class for all errors raised by orlicz_mp."""


class OverflowDomain(OrliczError, ArithmeticError):
    """An N-function was evaluated beyond its safe domain."""


class NoBracket(OverflowDomain):
    """The Legendre bisection could not bracket ``t phi(t) = s``."""


class NonMonotoneDensity(OrliczError, ValueError):
    """``t phi(t)`` fails to be strictly increasing on the sample grid."""


class UnknownModel(OrliczError, KeyError):
    pass


class ParamOutOfRange(OrliczError, ValueError):
    pass


class DegenerateIndex(OrliczError, ValueError):
    pass


class BadResolution(OrliczError, ValueError):
    pass


class NonzeroBoundary(OrliczError, ValueError):
    """A function expected to vanish on the boundary does not."""


class NoPositivePlateau(OrliczError):
    pass


class MaxIterations(OrliczError):
    pass


class NonDecreasingStep(OrliczError):
    """Backtracking line search failed to produce a descent step."""


class CollapsedPath(OrliczError):
    """The mountain-pass level dropped below the geometry constant rho."""


class HypothesisFailed(OrliczError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LambdaTooSmall(OrliczError):
    """lambda does not exceed the witness threshold.

    ``report`` carries the minimizer-only :class:`~orlicz_mp.solver.SolverReport`.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigParse(OrliczError, ValueError):
    pass

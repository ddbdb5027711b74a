"""Exception types raised across the package."""


class BatchError(Exception):
    """Base class for every error raised by cfmmbatch."""


class InstanceError(BatchError):
    """Malformed instance or input file."""


class InvalidPrices(BatchError):
    pass


class TradeShapeError(BatchError):
    pass


class SingularSpot(BatchError):
    pass


class NonConcaveFunction(BatchError):
    pass


class DegenerateSpec(BatchError):
    pass


class InvalidFee(BatchError):
    pass


class UnboundedDensity(BatchError):
    pass


class OutOfRange(BatchError):
    pass


class InconsistentDensities(BatchError):
    pass


class InfeasibleState(BatchError):
    pass


class UnsupportedParticipant(BatchError):
    pass


class NotRational(BatchError):
    pass


class ActiveSetError(BatchError):
    pass


class WrongArity(BatchError):
    pass


class IncompleteSolution(BatchError):
    pass


class InvalidAlpha(BatchError):
    pass


class UnknownCfmm(BatchError):
    pass


class NoEquilibriumFound(BatchError):
    """No sign change of excess demand was found on the scanned rate range."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class NotConverged(BatchError):
    """Iteration cap reached; ``best`` holds the best solution seen."""

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals

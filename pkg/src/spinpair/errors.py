"""Exception hierarchy. Every error raised on purpose derives from SpinPairError."""


class SpinPairError(Exception):
    pass


class InvalidInputError(SpinPairError, ValueError):
    pass


class DegenerateCouplingError(SpinPairError, ZeroDivisionError):
    """Second form of the density change hits omega_delta +- (J + Dd) == 0."""


class QuadratureError(SpinPairError, RuntimeError):
    def __init__(self, message, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class RankDeficiencyError(SpinPairError, ArithmeticError):
    pass


class InitializationError(SpinPairError, ValueError):
    """Not enough detectable maxima to seed a fit."""


class InconsistentMeasurementError(SpinPairError, ValueError):
    """A square-root argument in an inversion formula came out negative.

    ``n_sigma`` says how many propagated standard deviations the offending
    quantity lies below zero.
    """

    def __init__(self, message, n_sigma=None):
        super().__init__(message)
        self.n_sigma = n_sigma


class NoMaximaError(SpinPairError, ValueError):
    pass

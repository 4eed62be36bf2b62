"""Exception types shared by all modules."""


class ParameterError(ValueError):
    """Invalid parameter supplied by the caller."""


class EvaluationError(ArithmeticError):
    """A numerical evaluation could not reach its accuracy target."""


class DivergentSeriesError(EvaluationError):
    """A series failed its convergence guard.

    ``ratio`` holds the offending (asymptotic or observed) term ratio.
    """

    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class NumericalConsistencyError(EvaluationError):
    """A computed quantity violated a sign or mass invariant."""


class InfiniteMomentError(ParameterError):
    """A moment that the requested computation needs is infinite."""

"""Exception types raised by the decomposition routines."""


class AprankError(Exception):
    """Base class for all library errors."""


class ShapeMismatchError(AprankError, ValueError):
    """Two tensors (or a tensor and a point) disagree on ``n`` or ``d``."""


class BudgetExceededError(AprankError, ValueError):
    """A computation would exceed its configured work or memory budget."""


class RankDeficiencyError(AprankError, ArithmeticError):
    """The Gram matrix of the selected rank-one tensors is numerically singular.

    ``index`` is the position of the first vector whose inclusion pushes the
    condition number past the threshold.
    """

    def __init__(self, message, index, condition):
        super().__init__(message)
        self.index = index
        self.condition = condition


class SearchFailure(AprankError, RuntimeError):
    """No sampled point met the witness requirement within the retry budget.

    Carries the best point seen and ``|g(best_point)|``.  When raised out of a
    decomposition routine, ``partial`` holds the decomposition built so far.
    """

    def __init__(self, message, best_point, best_value, partial=None):
        super().__init__(message)
        self.best_point = best_point
        self.best_value = best_value
        self.partial = partial


class SparsifyFailure(AprankError, RuntimeError):
    """All sparsification redraws were rejected; ``best`` is the closest candidate."""

    def __init__(self, message, best, best_error):
        super().__init__(message)
        self.best = best
        self.best_error = best_error


class FrankWolfeError(AprankError, RuntimeError):
    """Frank-Wolfe hit its iteration budget without reaching the tolerance."""

    def __init__(self, message, decomposition, trace):
        super().__init__(message)
        self.decomposition = decomposition
        self.trace = trace

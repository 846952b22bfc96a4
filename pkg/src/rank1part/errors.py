"""Exception types raised across the package."""


class Rank1Error(Exception):
    """Base class for all package errors."""


class DegenerateInputError(Rank1Error, ValueError):
    """Input data make the requested construction undefined (zero sums, identical rows...)."""


class ConvergenceError(Rank1Error):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, n_iter=None):
        super().__init__(message)
        self.residual = residual
        self.n_iter = n_iter


class NumericalError(Rank1Error):
    """Non-finite values appeared during a computation."""


class SelectionError(Rank1Error):
    """No regularization value produced a usable partition."""


class GenerationError(Rank1Error):
    """Synthetic data generation gave up."""

"""Exception types shared across the package."""


class SpikedWishartError(Exception):
    """Base class for all library errors."""


class ParameterError(SpikedWishartError, ValueError):
    """A parameter is outside its documented domain."""


class NumericError(SpikedWishartError, ArithmeticError):
    """A numeric operation produced or encountered non-finite values."""


class ConvergenceError(SpikedWishartError, RuntimeError):
    """An iterative solver hit its iteration cap before converging.

    Carries the residual norms of the not-yet-converged quantities in
    ``residuals``.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegenerateSingularValueError(SpikedWishartError, ValueError):
    """Jacobian requested at a clustered (numerically multiple) singular value.

    The derivative formula assumes simple singular values; callers may drop
    the offending sample or reduce the number of covered values.
    """


class DegenerateBatchError(SpikedWishartError, RuntimeError):
    """Too many samples of a batch were dropped for degenerate derivatives."""

    def __init__(self, message, dropped=0, batch=0):
        super().__init__(message)
        self.dropped = dropped
        self.batch = batch

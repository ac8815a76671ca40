"""Exception types shared across the package."""


class FilterStabError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(FilterStabError):
    """Invalid or inconsistent configuration values."""


class InvalidStateError(FilterStabError):
    """State vector contains non-finite entries or has the wrong shape."""


class DivergenceError(FilterStabError):
    """Numerical integration blew up (state left the attractor scale)."""


class InsufficientSampleError(FilterStabError):
    """Operation needs more sample points than the measure provides."""


class DegenerateWeightsError(FilterStabError):
    """All particle weights underflowed to zero at a filtering step."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"all particle weights degenerate at step {step}")


class NumericalError(FilterStabError):
    """Linear algebra failure with diagnostic context."""


class SinkhornConvergenceError(FilterStabError):
    """Fixed-point iteration hit the iteration cap before the tolerance."""

    def __init__(self, message, last_rel_err=None, context=None):
        self.last_rel_err = last_rel_err
        self.context = context
        super().__init__(message)


class UnsupportedInstanceError(FilterStabError):
    """Exact small-instance solver called outside its supported regime."""


class UndefinedCorrelationError(FilterStabError):
    """Pearson correlation requested for a zero-variance input."""

"""Exception hierarchy shared by all ksglasso modules."""


class KsglassoError(Exception):
    """Base class for all errors raised by this package."""


class InputError(KsglassoError, ValueError):
    """Malformed or inconsistent user input (shapes, non-finite values, ...)."""


class ResourceLimitError(KsglassoError):
    """A dense/test-scale operation was asked to exceed its size cap."""


class NumericalError(KsglassoError):
    """Numerical breakdown: failed factorization, corrupted solver state."""


class NotPositiveDefiniteError(NumericalError):
    """The Kronecker sum of the two graphs is not positive definite."""


class DegenerateGaugeError(KsglassoError, ValueError):
    """Trace-ratio adjustment is undefined (target trace would be zero)."""


class LineSearchError(NumericalError):
    """Backtracking line search exhausted its budget without acceptance."""


class GenerationError(KsglassoError):
    """Random graph generation failed to meet its calibration targets."""

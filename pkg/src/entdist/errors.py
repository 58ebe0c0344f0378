"""Exception types shared across the package."""


class EntdistError(Exception):
    """Base class for all package errors."""


class InputError(EntdistError, ValueError):
    """Invalid argument (non-finite value, out-of-range parameter, bad state)."""


class ConfigError(EntdistError):
    """Malformed scenario configuration (CLI flags or config file)."""


class DivergenceError(EntdistError):
    """Spectral density evaluated exactly at a non-integrable point.

    The density is infinite there; callers must treat the point as a
    divergence, not as a large finite value.
    """


class AccuracyError(EntdistError):
    """A quadrature failed its internal self-convergence check.

    Carries the estimated error so callers can report it.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InstabilityError(EntdistError):
    """Numerical propagation left the physical region (|b| blew up)."""


class ConvergenceError(EntdistError):
    """An iterative solver hit its iteration cap without converging."""

class LbvarError(Exception):
    """Base class for every error raised by lbvar."""


class DomainError(LbvarError, ValueError):
    """An argument lies outside the domain of the operation."""


class NotPositiveDefiniteError(DomainError):
    """A matrix that must be symmetric positive definite failed its Cholesky factorisation."""


class RejectedConfigurationError(DomainError):
    """A simulation configuration cannot be used (for example an explosive VAR)."""


class IngestError(DomainError):
    """A data file could not be parsed or transformed."""


class NumericalError(LbvarError, ArithmeticError):
    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class SamplerError(NumericalError):
    """
    Raised when a Gibbs run breaks down numerically.

    The sweep index and the number of draws already retained are kept so the caller
    can report how far the chain got before it aborted.
    """

    def __init__(self, message, sweep, retained, cause=None):
        super().__init__(f'{message} (sweep {sweep}, {retained} draws retained)',
                         diagnostic=getattr(cause, 'diagnostic', None))
        self.sweep = sweep
        self.retained = retained
        self.cause = cause


class ConfigError(LbvarError):
    """The resolved run configuration is invalid."""

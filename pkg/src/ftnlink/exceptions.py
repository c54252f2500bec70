"""Exception hierarchy for ftnlink."""


class FtnLinkError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FtnLinkError, ValueError):
    """An argument is outside its valid domain."""


class ConfigurationError(FtnLinkError, ValueError):
    """A combination of settings cannot be realized."""


class DecodeError(FtnLinkError):
    """A received block cannot be decoded (e.g. composition violated)."""


class EstimationFailedError(FtnLinkError):
    """A blind or pilot-aided estimator found no reliable peak."""


class SyncFailedError(FtnLinkError):
    """Preamble correlation did not produce a clear peak."""


class TrainingFailedError(FtnLinkError):
    """Adaptive equalizer training diverged."""


class ComplexityError(FtnLinkError):
    """A trellis would exceed the configured state budget."""

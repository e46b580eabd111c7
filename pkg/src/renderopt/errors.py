"""Shared exception and warning types."""


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed or fails validation.

    The message names the offending key path (e.g. ``diffusion.learning_rate``).
    """


class NumericalError(RuntimeError):
    """Raised when a numerical routine produces non-finite values or diverges."""


class ConvergenceWarning(UserWarning):
    """Emitted when an inner iterative solve stops at its iteration cap."""

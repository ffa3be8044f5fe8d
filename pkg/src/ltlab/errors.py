"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so anything user-facing
should raise one of them rather than a bare exception.
"""


class ConfigError(ValueError):
    """Invalid configuration document, CLI argument, or hyper-parameter."""


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


class NumericError(RuntimeError):
    """Non-finite value encountered during training or evaluation."""

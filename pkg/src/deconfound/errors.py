"""Typed errors raised across the package.

Every malformed input maps to one of these; callers (and the CLI) can rely
on the type rather than parsing messages.
"""


class DeconfoundError(Exception):
    """Base class for all package errors."""


class FormatError(DeconfoundError):
    """Malformed binary representation file or labels table."""


class JoinError(DeconfoundError):
    """Representation rows and label rows cannot be aligned."""


class ValidationError(DeconfoundError):
    """An input violates a documented contract (non-binary t, NaN, ...)."""


class DegenerateDataError(DeconfoundError):
    """Dataset or slice has only one treatment arm (or an empty arm)."""


class ShapeError(DeconfoundError):
    """Dimension mismatch between model and data."""


class InsufficientDataError(DeconfoundError):
    """Too few rows for the requested fold layout."""


class ConvergenceError(DeconfoundError):
    """Iterative solver failed to reach its stated tolerance."""

    def __init__(self, message, gradient_norm=None):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class OverlapError(DeconfoundError):
    """An estimated propensity hit 0 or 1 exactly; separability suspect."""


class WeakInstrumentError(DeconfoundError):
    """Mean first-stage score is numerically zero."""


class GenerationError(DeconfoundError):
    """Synthetic representation map failed its probe-recoverability gate."""


class ConfigError(DeconfoundError):
    """Unparseable or inconsistent run configuration."""

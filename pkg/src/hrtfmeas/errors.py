"""Exception hierarchy shared across the toolkit.

Every error carries a ``category`` used by the service layer to pick an HTTP
status and by the CLI to pick an exit code (validation -> 1, numerical -> 2,
io -> 3).
"""


class HrtfMeasError(Exception):
    """Base class for all toolkit errors."""

    category = "validation"


class ConfigError(HrtfMeasError):
    """Invalid configuration or arguments (bad field values, inconsistent
    shapes, unknown keys)."""

    category = "validation"


class NumericalFailureError(HrtfMeasError):
    """A numerical procedure failed beyond recovery (non-convergent series,
    non-positive innovation variance, singular matrix after jitter rescue)."""

    category = "numerical"


class ArchiveError(HrtfMeasError):
    """Malformed, truncated or incompatible archive/audio files."""

    category = "io"


class OutputExistsError(HrtfMeasError):
    """Refusing to overwrite an existing output without --force."""

    category = "io"

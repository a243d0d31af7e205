"""Exception hierarchy for the dipe toolkit.

Every domain error raised by the library derives from :class:`DipeError`,
so callers (notably the CLI) can separate data/validation failures from
programming errors and plain I/O failures.
"""


class DipeError(Exception):
    """Base class for all dipe domain errors."""


class TensorFormatError(DipeError):
    """A tensor file violates the binary container format."""


class BadMagicError(TensorFormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(TensorFormatError):
    """File declares an unsupported format version."""


class TruncatedFileError(TensorFormatError):
    """File is shorter than its header promises (or has trailing bytes)."""


class ValueRangeError(TensorFormatError):
    """A stored probability lies outside [0, 1] (or is not finite)."""


class RleError(DipeError):
    """A run-length string cannot be decoded. Message carries the token index."""


class ManifestError(DipeError):
    """A manifest document or its referenced files fail validation."""


class MissingPredictionError(ManifestError):
    """A (model, slice) pair has no prediction file."""


class DimensionMismatchError(ManifestError):
    """Referenced tensors disagree on (classes, height, width)."""


class DuplicateModelIdError(ManifestError):
    """Two models in one manifest share a model_id."""

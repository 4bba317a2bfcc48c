"""Exception types shared across the engine."""


class SimSearchError(Exception):
    """Base class for all engine errors."""


class InvalidConfigError(SimSearchError):
    """Bad dimensions, non-divisible code lengths, inconsistent specs."""


class ShapeError(SimSearchError):
    """Mismatched vector dimensions or code lengths."""


class DegenerateVectorError(SimSearchError):
    """Zero-norm vector where a direction is required."""


class OutOfWindowError(SimSearchError):
    """Record timestamp falls outside the rolling retention window."""


class IntegrityError(SimSearchError):
    """Corrupt or truncated persisted data."""


class UnsupportedVersionError(SimSearchError):
    """Persisted data written by an unknown format version."""


class NotFoundError(SimSearchError):
    """Referenced item or rule does not exist."""


class InvalidJudgmentError(SimSearchError):
    """Relevance judgment with an empty relevant set."""

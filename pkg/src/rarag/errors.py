"""Exception hierarchy. Every error carries a stable ``code`` string."""
from __future__ import annotations


class RaragError(Exception):
    code = "RARAG_ERROR"


class ConfigError(RaragError, ValueError):
    """Invalid construction or configuration values."""

    def __init__(self, message: str, code: str = "REJECT_RANGE"):
        super().__init__(message)
        self.code = code


class DimensionMismatch(RaragError, ValueError):
    code = "DIMENSION_MISMATCH"


class SourceIndexOutOfRange(RaragError, IndexError):
    code = "SOURCE_INDEX_OUT_OF_RANGE"


class DegenerateMatrix(RaragError, ValueError):
    code = "DEGENERATE_MATRIX"


class DegenerateVariance(RaragError, ValueError):
    code = "DEGENERATE_VARIANCE"


class LengthMismatch(RaragError, ValueError):
    code = "LENGTH_MISMATCH"


class ProviderFailure(RaragError):
    code = "PROVIDER_FAILURE"

    def __init__(self, source_id: int, reason: str):
        super().__init__(f"source {source_id}: {reason}")
        self.source_id = source_id
        self.reason = reason


class InvariantViolation(RaragError):
    code = "INVARIANT_VIOLATION"

"""Exception types shared across the engine.

Every validation failure carries a stable machine-readable ``code`` so the
HTTP layer can surface it without string matching.
"""


class RankfuseError(Exception):
    """Base class for all engine errors."""

    code = "internal-error"


class ValidationError(RankfuseError, ValueError):
    """Caller-supplied input violated a precondition."""

    code = "validation-error"


class DimensionMismatchError(ValidationError):
    code = "dimension-mismatch"


class DuplicateIdError(ValidationError):
    code = "duplicate-id"


class EmptyDatabaseError(ValidationError):
    code = "empty-database"


class KOutOfRangeError(ValidationError):
    code = "k-out-of-range"


class WeightError(ValidationError):
    """Criterion weights are negative or do not sum to 1."""

    code = "invalid-weights"


class SchemaMismatchError(ValidationError):
    """Two binary clinical vectors were built under different schemas."""

    code = "schema-mismatch"


class ClinicalRequiredError(ValidationError):
    """A fused query was issued without clinical data."""

    code = "clinical-required"


class MissingFieldError(ValidationError):
    code = "missing-field"


class UndeclaredValueError(ValidationError):
    """Categorical value not listed in the field's admissible set."""

    code = "undeclared-value"


class ValueOutOfRangeError(ValidationError):
    """Numeric value falls outside every declared bin."""

    code = "value-out-of-range"


class FormatError(RankfuseError):
    """A persisted file is structurally malformed."""

    code = "format-error"


class ChecksumError(FormatError):
    code = "checksum-mismatch"


class VersionError(FormatError):
    code = "version-mismatch"

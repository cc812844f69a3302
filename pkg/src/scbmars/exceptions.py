"""Exception types used across the package."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class UnsupportedModelError(RuntimeError):
    """Operation not defined for this model variant (e.g. per-arm outcome
    prediction on a single-model transformed-outcome fit)."""


class ArchiveError(ValueError):
    """Model archive is malformed or violates the schema."""


class ArchiveVersionError(ArchiveError):
    """Model archive was written by an incompatible major format version."""


class CsvFormatError(ValueError):
    """CSV ingestion failure, with row/column location where applicable."""

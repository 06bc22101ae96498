"""Exception types shared across the package."""


class KCohortError(Exception):
    """Base class for all kcohort errors."""


class DatasetFormatError(KCohortError):
    """A dataset, campaign, or assignment file violates its format contract."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UndefinedSimilarityError(KCohortError):
    """Similarity requested between two empty vectors."""


class UndefinedHashError(KCohortError):
    """A hash was requested for an empty vector."""


class InfeasibilityError(KCohortError):
    """The anonymity bound cannot be met (fewer users than K)."""


class PartitionError(KCohortError):
    """A cohort assignment does not partition the user set."""


class ConfigError(KCohortError):
    """Invalid configuration for a generator or CLI run."""

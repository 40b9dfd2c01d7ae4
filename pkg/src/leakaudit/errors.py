"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
StageError -> 4.
"""

from __future__ import annotations


class LeakAuditError(Exception):
    """Base class for all package errors."""


class ConfigError(LeakAuditError, ValueError):
    """Invalid configuration value or unreadable/missing config input."""


class DataError(LeakAuditError, ValueError):
    """Input data violates a documented contract."""


class InvalidRecordError(DataError):
    """A patient record fails cohort eligibility invariants."""


class StageError(LeakAuditError, RuntimeError):
    """A pipeline stage failed; carries the stage name for the abort report."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage

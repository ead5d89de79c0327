"""
LongiForest Utilities

Named errors, dataset validation, audit trail and provenance registry.
"""

from .validation import DatasetValidator, ValidationResult, validate_inputs
from .audit import AuditLogger
from .version_registry import VersionRegistry

__all__ = ["DatasetValidator", "ValidationResult", "validate_inputs", "AuditLogger", "VersionRegistry"]

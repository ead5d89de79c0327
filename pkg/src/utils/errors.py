"""
Named errors for LongiForest

Validation errors describe bad inputs or configuration and map to CLI exit
code 2. Computation errors describe conditions met while fitting or
evaluating; most are caught inside the engines and turned into skipped
candidates or audit warnings, and the rest map to exit code 3.
"""


class LongiForestError(Exception):
    """Base class for all package errors"""


class DataValidationError(LongiForestError, ValueError):
    """Input or configuration violates a declared invariant"""


class ComputationError(LongiForestError, RuntimeError):
    """A numerical procedure could not produce a result"""


# Validation errors

class MissingColumn(DataValidationError):
    pass


class EmptyTable(DataValidationError):
    pass


class UnparseableValue(DataValidationError):
    pass


class DuplicateMeasurement(DataValidationError):
    pass


class DuplicateSubject(DataValidationError):
    pass


class UnknownLevel(DataValidationError):
    pass


class InvalidOutcome(DataValidationError):
    pass


class UnknownMarker(DataValidationError):
    pass


class MtryTooLarge(DataValidationError):
    pass


class UnknownCause(DataValidationError):
    pass


class MissingCause(DataValidationError):
    pass


class SchemaMismatch(DataValidationError):
    pass


class UnknownPredictor(DataValidationError):
    pass


class OverlappingGroups(DataValidationError):
    pass


class EmptyGroup(DataValidationError):
    pass


class DataMismatch(DataValidationError):
    """Training data hash differs from the one stored in the archive"""


class InvalidConfig(DataValidationError):
    pass


# Computation errors

class InsufficientData(ComputationError):
    pass


class SingularDesign(ComputationError):
    pass


class NoValidCut(ComputationError):
    pass


class TooManyLevels(ComputationError):
    pass


class InvalidPartition(ComputationError):
    pass


class NeverOob(ComputationError):
    pass


class EmptyGrid(ComputationError):
    pass

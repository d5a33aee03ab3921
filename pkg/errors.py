"""
Exception hierarchy shared by services and commands.

Every error carries a human-readable ``detail`` and the process ``exit_code``
the CLI returns for it: 2 for input/validation problems, 3 for numerical
failures.
"""
from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class FlexRegionError(Exception):
    """Base error with an exit code and a detail message."""

    exit_code: int = EXIT_NUMERICAL

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class DataValidationError(FlexRegionError):
    """Malformed or inconsistent input data."""

    exit_code = EXIT_VALIDATION

    def __init__(self, detail: str, row: Optional[int] = None):
        if row is not None:
            detail = f"row {row}: {detail}"
        super().__init__(detail)
        self.row = row


class ConfigError(FlexRegionError):
    exit_code = EXIT_VALIDATION


class EmptyDatasetError(FlexRegionError):
    exit_code = EXIT_VALIDATION


class BundleSchemaError(FlexRegionError):
    exit_code = EXIT_VALIDATION


class MissingFeatureError(FlexRegionError):
    exit_code = EXIT_VALIDATION


class NumericalError(FlexRegionError):
    exit_code = EXIT_NUMERICAL


class SolverError(NumericalError):
    """The convex solver failed to return a usable point."""


class NonConvexError(NumericalError):
    """Quadratic cost matrix is not positive semidefinite."""


class InfeasibleProgramError(NumericalError):
    pass


class UnboundedProgramError(NumericalError):
    pass


class EmptyRegionError(NumericalError):
    """Limits and bands admit no load profile for the given context."""


class RankDeficientError(NumericalError):
    pass

"""Exception hierarchy shared by all modules.

Each class maps to one CLI exit code (see `canalsense.cli`).
"""


class CanalSenseError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(CanalSenseError):
    """Bad config file, flag, grid spec, or persisted-file mismatch."""

    exit_code = 1


class DomainError(CanalSenseError):
    """Physical-parameter combination outside the model's domain."""

    exit_code = 2


class NumericalError(CanalSenseError):
    """Singular matrix, non-convergent iteration, or degenerate estimate."""

    exit_code = 3


class DegenerateOutputError(NumericalError):
    """Zero output variance makes a sensitivity index undefined."""


class ValidationFailure(CanalSenseError):
    """One or more self-validation checks failed."""

    exit_code = 4

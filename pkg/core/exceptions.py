from rest_framework import serializers


class OpfError(Exception):
    """Base class for every error raised by the OPF library."""


class CaseFileError(serializers.ValidationError, OpfError):
    """
    A case file failed schema or cross-reference validation.

    `detail` keeps the nested DRF error mapping so the offending location
    (region, table, row, field) can be read back by callers and tests.
    """

    def __init__(self, detail, path=None):
        super().__init__(detail)
        self.path = str(path) if path is not None else None

    def __str__(self):
        prefix = f"{self.path}: " if self.path else ''
        return f"{prefix}{self.detail}"


class FormulationError(OpfError):
    """The variable layout or a constraint block is internally inconsistent."""


class ConfigurationError(OpfError):
    """Unknown algorithm name or invalid numerical parameter."""


class SolverError(OpfError):
    """The interior-point KKT matrix could not be factorized."""


class SubproblemError(OpfError):
    """A region's local NLP did not reach a usable KKT point."""

    def __init__(self, region_id, solution=None, message=None):
        self.region_id = region_id
        self.solution = solution
        status = solution.status if solution is not None else 'unknown'
        super().__init__(message or f"Local problem of region '{region_id}' failed with status '{status}'.")


class CoordinationError(OpfError):
    """The coordinator's linear system (consensus or coupled QP) is singular."""

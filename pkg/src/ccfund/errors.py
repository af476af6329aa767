"""Shared exception types."""


class SolverError(RuntimeError):
    """Raised when a solver guard trips or a numeric routine fails to converge."""

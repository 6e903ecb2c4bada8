"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""

from __future__ import annotations


class StanceLensError(Exception):
    """Base class for all package errors."""


class ConfigError(StanceLensError):
    """Invalid configuration. Carries the full list of problems found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(StanceLensError):
    """Malformed or insufficient input data."""


class RecordParseError(DataError):
    """A corpus line could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class SchemaError(RecordParseError):
    """A parsed record is missing a mandatory field or has a bad type."""


class NumericError(StanceLensError):
    """A numeric routine failed (divergence, non-convergence, degeneracy)."""

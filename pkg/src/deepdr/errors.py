"""Exception hierarchy.

Data problems derive from ``DataError`` (a ``ValueError``); numerical
failures derive from ``NumericalError`` (an ``ArithmeticError``). The CLI
maps the two families to distinct exit codes.
"""

from __future__ import annotations


class DataError(ValueError):
    """Base class for problems with user-supplied data or configuration."""


class SchemaError(DataError):
    """A required column is missing or two schemas cannot be reconciled."""


class ParseError(DataError):
    """A cell could not be parsed as a finite number."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(DataError):
    """A value lies outside its admissible domain (e.g. a nonpositive weight)."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ConfigError(DataError):
    """An invalid configuration value, such as an unknown scenario name."""


class NumericalError(ArithmeticError):
    """Base class for numerical failures during fitting."""


class RankError(NumericalError):
    """A design matrix or Hessian is rank deficient."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration limit."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class TrainingError(NumericalError):
    """Network training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch

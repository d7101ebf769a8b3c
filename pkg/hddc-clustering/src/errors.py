"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI reports for it.
"""
from typing import Optional


class HddcError(Exception):
    exit_code = 4


class InvalidInputError(HddcError):
    """Arguments or data violate an operation's preconditions."""
    exit_code = 3


class DataReadError(HddcError):
    """An input file could not be opened or read."""
    exit_code = 2


class DataParseError(InvalidInputError):
    """CSV or spec content is malformed (ragged rows, non-numeric cells)."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.row = row
        self.column = column


class DegenerateClusterError(HddcError):
    exit_code = 4

    def __init__(self, component: int, weight: float):
        super().__init__(f"component {component} is degenerate (weight {weight:.3g})")
        self.component = component
        self.weight = weight


class NumericalError(HddcError):
    exit_code = 4


class FitFailedError(HddcError):
    """Every restart of a fit ended degenerate or numerically invalid."""
    exit_code = 4


class SelectionFailedError(HddcError):
    exit_code = 4


def exit_code_for(error: BaseException) -> int:
    """Exit code for an exception caught inside a benchmark stage."""
    return getattr(error, "exit_code", HddcError.exit_code)

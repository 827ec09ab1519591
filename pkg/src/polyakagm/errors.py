"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class PolyakError(Exception):
    """Base class for all package errors."""


class GradientVanished(PolyakError):
    """The current iterate is optimal up to the denominator guards.

    Not a failure: Polyak-type steps are undefined at an optimum, so the
    iteration simply stops there.
    """

    def __init__(self, message: str = "iterate is optimal", *, k: int | None = None):
        super().__init__(message)
        self.k = k


class MissingFStar(PolyakError):
    """An adaptive rule needs the optimal value but the oracle has none."""


class DomainError(PolyakError, ValueError):
    """A formula was evaluated outside the interval on which it is stated."""


class InfeasiblePep(PolyakError):
    """The one-step worst-case program has an empty feasible set."""


class DataError(PolyakError):
    """Malformed dataset file or invalid data for a problem constructor."""

    def __init__(self, message: str, *, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(PolyakError):
    """Invalid experiment configuration or command-line arguments."""

"""Shared failure type for deterministic inequality checks."""
from __future__ import annotations


class InequalityViolation(AssertionError):
    """A deterministic inequality failed beyond its rounding tolerance."""

    def __init__(self, name: str, slack: float, tol: float):
        self.name = name
        self.slack = slack
        self.tol = tol
        super().__init__(f"{name} violated: slack {slack:.3e} below -{tol:.0e}")


def require(name: str, slack: float, tol: float) -> float:
    if not slack >= -tol:
        raise InequalityViolation(name, slack, tol)
    return slack

"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class HeredlabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigurationError(HeredlabError, ValueError):
    """Malformed material card, measure file, or run configuration."""

    exit_code = 2

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + "\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(message)


class DomainError(HeredlabError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class InvalidWeightError(DomainError):
    """Tabulated weight is not positive, normalized, and non-increasing."""


class InvalidMeasureError(DomainError):
    """Relaxation measure has atoms at or below its cutoff or negative mass."""


class DivergenceError(HeredlabError, ArithmeticError):
    """A weighted kernel integral is infinite for the requested decay rate."""

    exit_code = 3


class NotContractiveError(HeredlabError):
    """The contractivity constant is not below one.

    The offending certificate is attached as ``certificate``.
    """

    exit_code = 3

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NonConvergenceError(HeredlabError):
    """An iteration hit its cap; the partial report is attached as ``report``."""

    exit_code = 4

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report

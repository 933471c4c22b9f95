"""Exception hierarchy for ratelab.

CLI exit codes: DomainError -> 2, BudgetExceededError -> 3.
"""


class RatelabError(Exception):
    """Base class for all ratelab errors."""


class DomainError(RatelabError, ValueError):
    """Input outside the domain of an operation."""

    exit_code = 2


class InvalidChannelError(DomainError):
    """Stokes/Choi data that does not describe a completely positive map."""

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class EmptyCandidateSetError(DomainError):
    """No channel is consistent with the observed parameter slice."""


class UnknownRegisterError(DomainError):
    pass


class ConfigError(DomainError):
    pass


class BudgetExceededError(RatelabError, ValueError):
    """Exhaustive enumeration would exceed the configured budget."""

    exit_code = 3

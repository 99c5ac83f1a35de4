# bpire/exceptions.py
from typing import List, Optional


class BpireError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ParameterDomainError(BpireError, ValueError):
    pass


class NotSubcriticalError(BpireError):
    pass


class OutOfScopeError(BpireError):
    pass


class BudgetExceededError(BpireError):
    pass


class SampleSizeError(BpireError, ValueError):
    pass


class MissingKernelEntriesError(BpireError):
    pass


class InitialLawError(BpireError):
    """Some state has G(0) = 1, so N(0; s) is undefined."""


class PopulationOverflowError(BpireError):
    pass


class NonMeanZeroError(BpireError):
    pass


class FitError(BpireError):
    pass


class UndecidedRootError(BpireError):
    exit_code = 2

    def __init__(self, detail: str, required_n: Optional[int] = None):
        super().__init__(detail)
        self.required_n = required_n


class ConfigError(BpireError):
    exit_code = 1

    def __init__(self, detail: str, messages: Optional[List[str]] = None):
        super().__init__(detail)
        self.messages = messages or []


class AcceptanceFailure(BpireError):
    exit_code = 3

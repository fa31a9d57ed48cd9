"""Exception hierarchy. Domain errors map to CLI exit code 1."""


class HolantError(Exception):
    """Base class for all domain errors raised by this package."""


class BackendMismatch(HolantError):
    pass


class InexactError(HolantError):
    """An exact result would need a scalar outside Q[i]."""


class ArityError(HolantError):
    pass


class ZeroSignatureError(HolantError):
    pass


class GridError(HolantError):
    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class BudgetExceeded(HolantError):
    pass


class NotInClass(HolantError):
    """A fast evaluator was handed a grid outside its tractable class."""


class TheoremViolation(HolantError):
    """A search that is guaranteed to succeed came back empty."""

    def __init__(self, message: str, payload=None):
        self.payload = payload
        super().__init__(message)


class WitnessError(HolantError):
    pass

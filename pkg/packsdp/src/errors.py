"""Exception hierarchy for packsdp. Standard-library bases are mixed in so generic handlers keep working."""

from __future__ import annotations

from typing import Any, Optional


class PackSdpError(Exception):
    """Base class for every error raised by packsdp."""


class InvalidMatrix(PackSdpError, ValueError):
    pass


class NotPSD(InvalidMatrix):
    pass


class ShiftInSpectrum(PackSdpError, ArithmeticError):
    pass


class MatrixOverflow(PackSdpError, OverflowError):
    pass


class ConvergenceFailure(PackSdpError, ArithmeticError):
    pass


class NumericalFailure(PackSdpError, ArithmeticError):
    pass


class EmptyFamily(PackSdpError, ValueError):
    pass


class InvalidUncertaintySet(PackSdpError, ValueError):
    pass


class ParseError(PackSdpError, ValueError):
    pass


class ValidationError(PackSdpError, ValueError):
    """Schema or invariant violation. `index` names the offending constraint when there is one."""

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        super().__init__(message)
        self.index = index


class ConfigError(ValidationError):
    pass


class NoPositiveDefiniteSubset(PackSdpError, ValueError):
    """No prefix of the constraint family sums to a positive definite matrix."""


class EmptyAfterSupportFilter(PackSdpError, ValueError):
    pass


class IterationCapExceeded(PackSdpError, RuntimeError):
    def __init__(self, message: str, trace: Any = None) -> None:
        super().__init__(message)
        self.trace = trace


class TooLarge(PackSdpError, ValueError):
    pass


class DegenerateDual(PackSdpError, ArithmeticError):
    pass

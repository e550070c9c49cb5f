"""Exception and warning types raised across the package."""

from __future__ import annotations


class HoptError(Exception):
    """Base class for all package errors."""


class NonSymmetric(HoptError, ValueError):
    pass


class NonFinite(HoptError, ValueError):
    pass


class NotPositiveDefinite(HoptError, ValueError):
    def __init__(self, pivot_index: int, pivot_value: float):
        super().__init__(f"non-positive pivot {pivot_value:.3e} at index {pivot_index}")
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class NoConvergence(HoptError, RuntimeError):
    pass


class DimensionMismatch(HoptError, ValueError):
    pass


class ParseError(HoptError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InfeasibleSpec(HoptError, ValueError):
    pass


class AllZeroVariance(HoptError, ValueError):
    pass


class Diverged(HoptError, ArithmeticError):
    pass


class RhoOutOfRange(HoptError, ValueError):
    pass


class ZetaOutOfRange(HoptError, ValueError):
    pass


class ConfigError(HoptError, ValueError):
    pass


class DegenerateResponse(UserWarning):
    """Training response is constant; its scale was set to 1."""


class StepSizeWarning(UserWarning):
    """Step size lies outside the range with a convergence guarantee."""

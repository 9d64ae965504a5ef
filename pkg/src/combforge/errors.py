"""Exception and warning types raised across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid run configuration. ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class NoBifurcation(ValueError):
    pass


class DegenerateBifurcation(ValueError):
    pass


class ZeroEpsilon(ValueError):
    pass


class UnsupportedOrder(ValueError):
    pass


class NumericalFailure(RuntimeError):
    """Base class for failures of an otherwise well-posed computation."""


class NoConvergence(NumericalFailure):
    def __init__(self, iterations: int, residual: float, index: int | None = None, what: str = "Newton"):
        self.iterations = iterations
        self.residual = residual
        self.index = index
        msg = f"{what} did not converge after {iterations} iterations (residual {residual:.3e})"
        if index is not None:
            msg += f" at continuation step {index}"
        super().__init__(msg)


class SingularJacobian(NumericalFailure):
    pass


class NotSaddleFocus(NumericalFailure):
    pass


class IntegratorBlowup(NumericalFailure):
    pass


class TrackingLost(NumericalFailure):
    pass


class FitIllConditioned(NumericalFailure):
    pass


class WindowTooSmall(NumericalFailure):
    pass


class Blowup(NumericalFailure):
    pass


class DomainTooSmall(NumericalFailure):
    pass


class OverlapWarning(UserWarning):
    pass


class OutOfRegime(UserWarning):
    pass

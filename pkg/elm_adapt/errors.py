#!/usr/bin/env python3
"""
Error types - Failures raised by the solver library
Every error carries a severity and the exit code the CLI reports for it.
"""

from enum import Enum
from typing import Optional


class ErrorSeverity(Enum):
    """Severity levels for errors."""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ElmError(Exception):
    """Base class for all library errors."""

    severity: ErrorSeverity = ErrorSeverity.HIGH
    exit_code: int = 2


class PointOutsideDomain(ElmError):
    """A query point lies outside every element of the mesh."""

    def __init__(self, point, distance: Optional[float] = None):
        self.point = tuple(float(c) for c in point)
        self.distance = distance
        message = f"point {self.point} is outside the mesh"
        if distance is not None:
            message += f" (distance {distance:.3e})"
        super().__init__(message)


class NoConvergence(ElmError):
    """The characteristic fixed-point iteration did not converge."""

    def __init__(self, iterations: int, update: float):
        self.iterations = iterations
        self.update = update
        super().__init__(
            f"fixed-point iteration stalled after {iterations} iterations "
            f"(last update {update:.3e}); try a smaller step"
        )


class GradientUnavailable(ElmError):
    """A velocity gradient was needed but none is available."""

    def __init__(self, what: str = "velocity field"):
        super().__init__(f"{what} has no gradient and finite differences are disabled")


class NonPositiveEpsilon(ElmError):
    """The diffusion coefficient must be strictly positive."""

    severity = ErrorSeverity.MEDIUM

    def __init__(self, epsilon: float):
        self.epsilon = epsilon
        super().__init__(f"diffusion coefficient must be positive, got {epsilon!r}")


class SolverDiverged(ElmError):
    """Conjugate gradients did not reach the requested tolerance."""

    severity = ErrorSeverity.CRITICAL

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"conjugate gradients stopped after {iterations} iterations "
            f"with relative residual {residual:.3e}"
        )


class StepUnderflow(ElmError):
    """The time step fell below k_min while trying to meet the tolerance."""

    def __init__(self, k: float, k_min: float, t: float):
        self.k = k
        self.k_min = k_min
        self.t = t
        super().__init__(
            f"time step {k:.3e} fell below k_min={k_min:.3e} at t={t:.6g}; "
            f"the time tolerance is unreachable"
        )


class ConfigError(ElmError):
    """Invalid run configuration."""

    severity = ErrorSeverity.MEDIUM
    exit_code = 1


class ParseError(ConfigError):
    """A configuration line could not be parsed."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ValidationError(ConfigError):
    """A configuration field has an invalid or missing value."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")

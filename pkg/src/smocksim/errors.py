"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class SmockError(Exception):
    """Base class for every error raised by smocksim."""


class SchemaError(SmockError):
    """The pattern document is not well-formed JSON or violates the schema."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location or {}


class ValidationError(SmockError):
    """The document is well-formed but describes an impossible pattern."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location or {}


class NumericalBlowup(SmockError):
    """A coordinate became non-finite; dt and stiffness are unstable together."""


class MaxIterationsExceeded(SmockError):
    """The 2D simulation hit its iteration cap before the stopping rule fired.

    The partial trace and last positions are attached for diagnosis.
    """

    def __init__(self, message, trace=None, positions=None):
        super().__init__(message)
        self.trace = trace
        self.positions = positions


class Infeasible(SmockError):
    """The direct solver could not reach the feasibility tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverSingular(SmockError):
    """The global step matrix of the deformer is not positive definite."""


class NonFinite(SmockError):
    """The deformer produced non-finite vertex positions."""

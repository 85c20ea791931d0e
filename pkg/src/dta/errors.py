"""Exception hierarchy shared by all modules."""

from __future__ import annotations

from typing import Any


class DTAError(Exception):
    """Base class for every error raised by the package."""


class InputError(DTAError, ValueError):
    """An argument is malformed (non-finite values, empty sample counts, ...)."""


class NonnegativityError(InputError):
    """A rate function would take a negative value."""


class OutOfRangeError(InputError):
    """A value lies outside the range of a cumulative function."""


class OutOfHorizonError(InputError):
    """A time query lies beyond the horizon an edge state was computed for."""


class HorizonEscapeError(OutOfHorizonError):
    """A composed exit time left the computed horizon."""


class ScenarioError(DTAError, ValueError):
    """A scenario document failed validation."""


class SchemaError(ScenarioError):
    pass


class CapacityError(ScenarioError):
    pass


class FreeFlowTimeError(ScenarioError):
    pass


class UnreachableSinkError(ScenarioError):
    pass


class ConfigurationError(DTAError, ValueError):
    pass


class PathExplosionError(ConfigurationError):
    pass


class ModelPreconditionError(ConfigurationError):
    """The network violates a requirement of the selected physical model."""


class NumericFailureError(DTAError, ArithmeticError):
    pass


class SolverDivergenceError(DTAError, RuntimeError):
    """Raised when an extension step fails to converge at the minimum step size.

    ``partial`` holds the result computed up to the achieved horizon.
    """

    def __init__(self, message: str, partial: Any = None) -> None:
        super().__init__(message)
        self.partial = partial

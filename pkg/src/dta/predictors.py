"""Cost predictors: map a path and an entry time to a predicted travel cost.

Predictors read travel times from an :class:`~dta.edge_loading.EdgeState`
rather than from raw flows, so they work with either physical model.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

from .edge_loading import EdgeState
from .errors import ConfigurationError, HorizonEscapeError, OutOfHorizonError
from .network import PathEntry

Path_ = Sequence[int]
#: ``(path, theta, travel_time(e, t)) -> cost``
CustomHook = Callable[[Path_, float, Callable[[int, float], float]], float]


def constant_predict(path: Path_, theta: float, state: EdgeState) -> float:
    """Sum of the current travel times along ``path``."""
    return float(sum(state.travel_time(e, theta) for e in path))


def perfect_predict(path: Path_, theta: float, state: EdgeState) -> float:
    """Arrival time of the composed exit-time maps minus ``theta``."""
    t = theta
    for e in path:
        try:
            t = state.exit_time(e, t)
        except OutOfHorizonError as exc:
            raise HorizonEscapeError(
                f"perfect prediction from t={theta:.6g} leaves the computed horizon {state.horizon:.6g}; "
                "extend the physics or use the composite predictor"
            ) from exc
    return t - theta


def composite_predict(path: Path_, theta: float, state: EdgeState, cutoff: float) -> float:
    """Perfect prediction while the running time is before ``cutoff``.

    The edges reached at or after the cutoff are costed with their travel
    time frozen at the cutoff. The cutoff is clamped to the state horizon,
    so the prediction never leaves the computed range.
    """
    cut = min(cutoff, state.horizon)
    t = theta
    for k, e in enumerate(path):
        if t >= cut:
            return t - theta + sum(state.travel_time(f, cut) for f in path[k:])
        t = state.exit_time(e, t)
    return t - theta


class Predictor:
    """Base class. Subclasses implement :meth:`path_cost`."""

    name = "abstract"
    #: additive predictors are sums of per-edge costs, which allows vectorised evaluation
    additive = False
    #: predictors looking past the current time need the whole-horizon physics
    needs_future = False

    def path_cost(self, path: Path_, theta: float, state: EdgeState) -> float:
        raise NotImplementedError

    def edge_costs(self, theta: float, state: EdgeState) -> np.ndarray:
        """Per-edge costs of an additive predictor."""
        raise NotImplementedError(f"{self.name} predictor is not additive")

    def path_costs(self, entry: PathEntry, theta: float, state: EdgeState) -> np.ndarray:
        if self.additive:
            return entry.incidence @ self.edge_costs(theta, state)
        return np.array([self.path_cost(p, theta, state) for p in entry.paths])

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class ConstantPredictor(Predictor):
    name = "constant"
    additive = True

    def path_cost(self, path, theta, state):
        return constant_predict(path, theta, state)

    def edge_costs(self, theta, state):
        return state.travel_times(theta)


class PerfectPredictor(Predictor):
    name = "perfect"
    needs_future = True

    def path_cost(self, path, theta, state):
        return perfect_predict(path, theta, state)


class CompositePredictor(Predictor):
    name = "composite"

    def __init__(self, cutoff: float):
        if not cutoff >= 0:
            raise ConfigurationError(f"composite cutoff must be >= 0, got {cutoff}")
        self.cutoff = float(cutoff)

    def path_cost(self, path, theta, state):
        return composite_predict(path, theta, state, self.cutoff)

    def __repr__(self) -> str:
        return f"CompositePredictor(cutoff={self.cutoff})"


class CustomPredictor(Predictor):
    """Wraps a user hook; this is where learned predictors plug in."""

    name = "custom"

    def __init__(self, hook: CustomHook):
        self.hook = hook

    def path_cost(self, path, theta, state):
        cost = float(self.hook(path, theta, state.travel_time))
        if not cost >= 0:
            raise ConfigurationError(f"custom predictor returned invalid cost {cost}")
        return cost


def parse_predictor(spec: str) -> Predictor:
    """``constant`` | ``perfect`` | ``composite:<cutoff>`` (cutoff may be ``inf``)."""
    name, _, arg = spec.partition(":")
    if name == "constant" and not arg:
        return ConstantPredictor()
    if name == "perfect" and not arg:
        return PerfectPredictor()
    if name == "composite":
        try:
            cutoff = float(arg) if arg else math.inf
        except ValueError:
            raise ConfigurationError(f"bad composite cutoff {arg!r}") from None
        return CompositePredictor(cutoff)
    raise ConfigurationError(f"unknown predictor {spec!r}; use constant, perfect or composite:<cutoff>")

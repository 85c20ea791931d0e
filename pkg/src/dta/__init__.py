"""Dynamic traffic assignment: coherent flows under point-queue or volume-delay
physics with deterministic or noisy predictive routing."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

from .edge_loading import (
    EdgeLoader,
    Flow,
    LinearDelayLoader,
    VickreyLoader,
    consistency_residual,
    linear_delay_load,
    make_loader,
    vickrey_load,
)
from .network import Network, PathSet, enumerate_paths, load_network
from .predictors import parse_predictor
from .ratefn import RateFunction
from .routing import DPERouting, NoiseModel, StochasticRouting, make_routing, parse_noise
from .solver import SolverConfig, SolveResult, banach_iterate, conservation_residual, equilibrium_gap, solve

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "DPERouting",
    "EdgeLoader",
    "Flow",
    "LinearDelayLoader",
    "Network",
    "NoiseModel",
    "PathSet",
    "RateFunction",
    "SolveResult",
    "SolverConfig",
    "StochasticRouting",
    "VickreyLoader",
    "banach_iterate",
    "conservation_residual",
    "consistency_residual",
    "enumerate_paths",
    "equilibrium_gap",
    "linear_delay_load",
    "load_network",
    "make_loader",
    "make_routing",
    "parse_noise",
    "parse_predictor",
    "solve",
    "vickrey_load",
]

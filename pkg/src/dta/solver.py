"""Extension scheme for coherent flows and the accompanying diagnostics.

A flow that is coherent on ``[0, T)`` is extended to ``[0, T + alpha)`` by
iterating the map that loads the candidate inflows, collects the resulting
node inflows and redistributes them with the routing splits. The past
before ``T`` is pinned. The step length adapts: halve on non-convergence,
grow by half after a success, give up below ``alpha_min``.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Generic, TypeVar

import numpy as np

from .edge_loading import EdgeLoader, EdgeState, Flow, consistency_residual
from .errors import ConfigurationError, SolverDivergenceError
from .network import Network, Node, PathSet
from .predictors import Predictor
from .ratefn import EPS, RateFunction, combine, distance, merged_breakpoints, restrict, step_function
from .routing import (
    DPERouting,
    RoutingContext,
    RoutingOperator,
    Split,
    StochasticRouting,
    active_edges,
    decompose_split,
    stochastic_split,
)

log = logging.getLogger(__name__)

X = TypeVar("X")

#: grid points closer than this are merged
SNAP = 1e-9


# -- generic fixed-point machinery -------------------------------------------


@dataclass
class FixedPointResult(Generic[X]):
    x: X
    converged: bool
    iterations: int
    residuals: list[float]
    monotone: bool  # residuals never increased once below 10 * tol


def banach_iterate(
    op: Callable[[X], X],
    x0: X,
    tol: float,
    max_iter: int,
    dist: Callable[[X, X], float] | None = None,
    stable: Callable[[], bool] | None = None,
) -> FixedPointResult[X]:
    """Iterate ``x <- op(x)`` until successive iterates are closer than ``tol``.

    ``stable`` may veto convergence (e.g. while the evaluation grid is still
    changing). Non-finite residuals end the iteration early.
    """
    if dist is None:

        def dist(a, b):
            return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))

    x = x0
    residuals: list[float] = []
    monotone = True
    for k in range(1, max_iter + 1):
        y = op(x)
        r = dist(y, x)
        if residuals and residuals[-1] < 10 * tol and r > residuals[-1]:
            monotone = False
        residuals.append(r)
        x = y
        if not math.isfinite(r):
            break
        if r < tol and (stable is None or stable()):
            return FixedPointResult(x, True, k, residuals, monotone)
    return FixedPointResult(x, False, len(residuals), residuals, monotone)


@dataclass
class PointwiseExtension:
    """Sampled solution of a pointwise fixed-point problem, built step by step."""

    times: np.ndarray
    values: np.ndarray
    steps: list[tuple[float, float, int]]  # (start, length, iterations)

    @property
    def horizon(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0


def extend_pointwise(
    psi: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t_end: float,
    alpha0: float,
    alpha_min: float,
    tol: float = 1e-10,
    max_iter: int = 200,
    samples_per_step: int = 101,
    x0: float = 0.0,
) -> PointwiseExtension:
    """Adaptive-step extension for operators acting on sampled functions.

    ``psi(ts, x)`` maps samples ``x`` at times ``ts`` to new samples. The
    same halve/grow policy as :func:`solve` is used; failing below
    ``alpha_min`` raises :class:`SolverDivergenceError`.
    """
    ts_all = [np.array([0.0])]
    xs_all = [psi(np.array([0.0]), np.array([x0]))]
    steps: list[tuple[float, float, int]] = []
    t, alpha = 0.0, alpha0
    while t < t_end - EPS:
        a = min(alpha, t_end - t)
        ts = np.linspace(t, t + a, samples_per_step)[1:]
        res = banach_iterate(lambda x: psi(ts, x), np.full(len(ts), xs_all[-1][-1]), tol, max_iter)
        if res.converged:
            ts_all.append(ts)
            xs_all.append(res.x)
            steps.append((t, a, res.iterations))
            t += a
            alpha = min(alpha0, 1.5 * a)
            continue
        alpha = a / 2
        if alpha < alpha_min - EPS:
            partial = PointwiseExtension(np.concatenate(ts_all), np.concatenate(xs_all), steps)
            raise SolverDivergenceError(
                f"fixed-point iteration diverged at t={t:.6g} with step below alpha_min={alpha_min:g} "
                f"(last residual {res.residuals[-1]:.3g})",
                partial,
            )
    return PointwiseExtension(np.concatenate(ts_all), np.concatenate(xs_all), steps)


# -- configuration and results -----------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    horizon: float
    alpha0: float = 1.0
    alpha_min: float = 0.25
    fp_tol: float = 1e-9
    max_iter: int = 200
    routing_step: float = 0.25
    p: float = 2.0
    initial_guess: str = "extrapolate"  # or "zero"
    outer_restarts: int = 0

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        if not 0 < self.alpha_min <= self.alpha0:
            raise ConfigurationError("need 0 < alpha_min <= alpha0")
        if not self.fp_tol > 0:
            raise ConfigurationError("fp_tol must be positive")
        if not 0 < self.routing_step <= self.alpha_min + EPS:
            raise ConfigurationError("routing step must be positive and at most alpha_min")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if not self.p >= 1:
            raise ConfigurationError("norm exponent must be >= 1")
        if self.initial_guess not in ("extrapolate", "zero"):
            raise ConfigurationError("initial guess must be 'extrapolate' or 'zero'")


class RoutingSplit:
    """Split fractions held constant on cells ``[grid[k], grid[k+1])``."""

    def __init__(self, grid: Sequence[float], entries: Sequence[Mapping[tuple[Node, int], Split]], horizon: float):
        if len(grid) != len(entries):
            raise ValueError("one split entry per grid point required")
        self.grid = np.asarray(grid, dtype=float)
        self.entries = tuple(entries)
        self.horizon = float(horizon)

    @classmethod
    def empty(cls) -> RoutingSplit:
        return cls([], [], 0.0)

    def extend(self, other: RoutingSplit) -> RoutingSplit:
        return RoutingSplit([*self.grid, *other.grid], [*self.entries, *other.entries], other.horizon)

    def at(self, v: Node, i: int, theta: float) -> Split:
        k = int(np.searchsorted(self.grid, theta, side="right")) - 1
        if k < 0:
            return {}
        return dict(self.entries[k].get((v, i), {}))

    def fraction(self, e: int, i: int, tail: Node) -> RateFunction:
        if not len(self.grid):
            return RateFunction.zero()
        vals = [entry.get((tail, i), {}).get(e, 0.0) for entry in self.entries]
        return step_function([*self.grid, self.horizon], vals)

    def rows(self) -> list[tuple[float, Node, int, int, float]]:
        out = []
        for theta, entry in zip(self.grid, self.entries):
            for (v, i), split in sorted(entry.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
                for e, r in sorted(split.items()):
                    out.append((float(theta), v, i, e, float(r)))
        return out

    def max_sum_error(self) -> float:
        err = 0.0
        for entry in self.entries:
            for split in entry.values():
                if split:
                    err = max(err, abs(sum(split.values()) - 1.0))
        return err


@dataclass
class StepRecord:
    start: float
    alpha: float
    converged: bool
    iterations: int
    residuals: list[float]
    monotone: bool


@dataclass
class SolveResult:
    flow: Flow
    splits: RoutingSplit
    steps: list[StepRecord]
    diagnostics: dict[str, Any] = field(default_factory=dict)
    status: str = "converged"
    state: EdgeState | None = None

    @property
    def horizon(self) -> float:
        return self.flow.horizon


@dataclass
class StepOutcome:
    flow: Flow
    splits: RoutingSplit
    state: EdgeState
    converged: bool
    iterations: int
    residuals: list[float]
    monotone: bool


# -- the extension map -------------------------------------------------------

Rows = tuple[tuple[RateFunction, ...], ...]


def node_inflows(net: Network, outflows: Sequence[Sequence[RateFunction]], horizon: float) -> dict[tuple[Node, int], RateFunction]:
    """``u_{v,i} + sum of commodity-i outflows of edges entering v`` on ``[0, horizon]``."""
    cut = (0.0, horizon)
    out = {}
    for i, com in enumerate(net.commodities):
        for v in net.nodes:
            parts = [restrict(com.inflow(v), cut)] + [restrict(outflows[e][i], cut) for e in net.in_edges(v)]
            out[(v, i)] = combine(parts, [1.0] * len(parts))
    return out


def _snap_points(points: Sequence[float]) -> np.ndarray:
    pts = np.unique(np.asarray(points, dtype=float))
    if len(pts) < 2:
        return pts
    keep = np.concatenate(([True], np.diff(pts) > SNAP))
    return pts[keep]


class ExtensionMap:
    """The map whose fixed point is the coherent extension to ``[0, T + alpha)``."""

    def __init__(
        self,
        net: Network,
        loader: EdgeLoader,
        routing: RoutingOperator,
        paths: PathSet,
        pinned: Rows,
        start: float,
        end: float,
        config: SolverConfig,
        previous: dict[tuple[Node, int], Split],
    ):
        self.net, self.loader, self.routing, self.paths = net, loader, routing, paths
        self.pinned = pinned
        self.start, self.end = start, end
        self.config = config
        self.previous = previous
        step = config.routing_step
        k0 = math.floor(start / step + 1e-9) + 1
        grid = [k * step for k in range(k0, int(math.ceil(end / step)) + 1) if k * step < end - SNAP]
        self.base_grid = [start, *grid]
        self.events: list[float] = []
        self.grew = False
        self.last_cells: np.ndarray = np.array([start])
        self.last_decisions: list[dict[tuple[Node, int], Split]] = []

    def _add_events(self, times) -> bool:
        added = False
        for t in times:
            t = float(t)
            if not self.start + SNAP < t < self.end - SNAP:
                continue
            near = [x for x in (*self.events, *self.base_grid) if abs(x - t) <= SNAP]
            if not near:
                self.events.append(t)
                added = True
        return added

    def cells(self) -> np.ndarray:
        return _snap_points([*self.base_grid, *self.events])

    def stable(self) -> bool:
        return not self.grew

    def __call__(self, g: Rows) -> Rows:
        net, T, H = self.net, self.start, self.end
        outflows, state = self.loader.load(net, g, H)
        b = node_inflows(net, outflows, H)
        self.grew = False
        if self.routing.tracks_events:
            found = [x for f in b.values() for x in f.breakpoints]
            found.extend(state.event_times(T, H))
            self.grew |= self._add_events(found)
        cells = self.cells()
        n_com = net.n_commodities
        node_idx = {v: k for k, v in enumerate(net.nodes)}
        previous = dict(self.previous)
        decisions = []
        excesses = []
        probe = [*cells, H] if self.routing.tracks_events else cells
        for k, theta in enumerate(probe):
            nin = np.zeros((len(net.nodes), n_com))
            for (v, i), f in b.items():
                nin[node_idx[v], i] = f(theta)
            ein = np.array([[g[e][i](theta) for i in range(n_com)] for e in range(net.n_edges)]).reshape(
                net.n_edges, n_com
            )
            ctx = RoutingContext(net, self.paths, state, nin, ein, previous)
            dec = self.routing.decide(ctx, theta)
            excesses.append(dec.excess)
            if k < len(cells):
                decisions.append(dec.splits)
                previous = {**previous, **dec.splits}
        if self.routing.tracks_events:
            crossings = []
            for k in range(len(probe) - 1):
                a, c = excesses[k], excesses[k + 1]
                for key, h0 in a.items():
                    h1 = c.get(key)
                    tol = getattr(self.routing, "tie_tol", 1e-9)
                    if h1 is not None and h0 > tol and h1 <= tol:
                        crossings.append(probe[k] + (probe[k + 1] - probe[k]) * h0 / (h0 - h1))
            self.grew |= self._add_events(crossings)
        self.last_cells, self.last_decisions = cells, decisions

        bounds = [*cells, H]
        new_rows = []
        for e, edge in enumerate(net.edges):
            row = []
            for i in range(n_com):
                if edge.tail == net.commodities[i].sink:
                    fresh = RateFunction.zero()
                else:
                    vals = [d.get((edge.tail, i), {}).get(e, 0.0) for d in decisions]
                    r = step_function(bounds, vals)
                    fresh = r.multiply(restrict(b[(edge.tail, i)], (T, H)))
                row.append(combine([self.pinned[e][i], fresh], [1.0, 1.0]))
            new_rows.append(tuple(row))
        return tuple(new_rows)

    def distance(self, g: Rows, h: Rows) -> float:
        worst = 0.0
        for rg, rh in zip(g, h):
            for a, c in zip(rg, rh):
                worst = max(worst, distance(a, c, (self.start, self.end), self.config.p))
        return worst


def initial_guess(pinned: Rows, start: float, end: float, how: str) -> Rows:
    if how == "zero" or start <= 0:
        return pinned
    rows = []
    for row in pinned:
        rows.append(
            tuple(combine([f, RateFunction.constant(f.left_limit(start), start, end)], [1.0, 1.0]) for f in row)
        )
    return tuple(rows)


def extension_step(
    net: Network,
    loader: EdgeLoader,
    routing: RoutingOperator,
    flow_so_far: Flow,
    start: float,
    alpha: float,
    config: SolverConfig,
    paths: PathSet | None = None,
    previous: dict[tuple[Node, int], Split] | None = None,
) -> StepOutcome:
    """One Banach solve extending ``flow_so_far`` from ``start`` to ``start + alpha``."""
    paths = paths or PathSet(net)
    end = start + alpha
    pinned: Rows = tuple(tuple(restrict(f, (0.0, start)) for f in row) for row in flow_so_far.inflow)
    psi = ExtensionMap(net, loader, routing, paths, pinned, start, end, config, dict(previous or {}))
    x0 = initial_guess(pinned, start, end, config.initial_guess)
    res = banach_iterate(psi, x0, config.fp_tol, config.max_iter, psi.distance, psi.stable)
    if not res.monotone:
        log.warning("residuals increased near convergence on [%g, %g]; step may be too large", start, end)
    outflows, state = loader.load(net, res.x, end)
    cut = (0.0, end)
    flow = Flow(res.x, [[restrict(f, cut) for f in row] for row in outflows], end)
    splits = RoutingSplit(psi.last_cells, psi.last_decisions, end)
    return StepOutcome(flow, splits, state, res.converged, res.iterations, res.residuals, res.monotone)


class _FrozenStatePredictor(Predictor):
    """Evaluates ``base`` against a fixed whole-horizon state."""

    def __init__(self, base: Predictor, state: EdgeState):
        self.base = base
        self.state = state
        self.name = base.name

    def path_cost(self, path, theta, state):
        return self.base.path_cost(path, theta, self.state)


def _with_predictor(routing: RoutingOperator, predictor: Predictor) -> RoutingOperator:
    if isinstance(routing, DPERouting):
        return DPERouting(predictor, routing.tie_policy, routing.tie_tol, routing.balanced)
    if isinstance(routing, StochasticRouting):
        op = StochasticRouting(predictor, routing.noise, routing.samples, routing.seed)
        op.name = routing.name
        return op
    raise ConfigurationError(f"cannot swap the predictor of {type(routing).__name__}")


def solve(net: Network, loader: EdgeLoader, routing: RoutingOperator, config: SolverConfig) -> SolveResult:
    """Coherent flow on ``[0, config.horizon]`` by adaptive extension steps."""
    loader.validate(net)
    meta = loader.metadata(net)
    if not meta.is_uniformly_strictly_causal:
        log.warning("some free-flow times are zero: the model is not strictly causal; convergence is best-effort")
    if routing.predictor.needs_future:
        if config.outer_restarts < 1:
            raise ConfigurationError(
                "the perfect predictor needs physics beyond the current step; "
                "set outer_restarts >= 1 or use the composite predictor"
            )
        return _solve_with_restarts(net, loader, routing, config)
    return _solve(net, loader, routing, config)


def _solve_with_restarts(net, loader, routing, config) -> SolveResult:
    from .predictors import CompositePredictor

    base = routing.predictor
    result = _solve(net, loader, _with_predictor(routing, CompositePredictor(math.inf)), config)
    for _ in range(config.outer_restarts):
        _, state = loader.load(net, result.flow.inflow, config.horizon)
        frozen = _FrozenStatePredictor(base, state.with_extrapolation())
        result = _solve(net, loader, _with_predictor(routing, frozen), config)
    result.diagnostics["outer_restarts"] = config.outer_restarts
    return result


def _solve(net: Network, loader: EdgeLoader, routing: RoutingOperator, config: SolverConfig) -> SolveResult:
    t0 = time.perf_counter()
    paths = PathSet(net)
    flow = Flow.zero(net, 0.0)
    splits = RoutingSplit.empty()
    steps: list[StepRecord] = []
    previous: dict[tuple[Node, int], Split] = {}
    state = None
    T, alpha = 0.0, config.alpha0
    while T < config.horizon - EPS:
        a = min(alpha, config.horizon - T)
        out = extension_step(net, loader, routing, flow, T, a, config, paths, previous)
        steps.append(StepRecord(T, a, out.converged, out.iterations, out.residuals, out.monotone))
        if out.converged:
            flow, state = out.flow, out.state
            splits = splits.extend(out.splits)
            if out.splits.entries:
                previous = {**previous, **out.splits.entries[-1]}
            T += a
            alpha = min(config.alpha0, 1.5 * a)
            continue
        alpha = a / 2
        if alpha < config.alpha_min - EPS:
            partial = SolveResult(flow, splits, steps, status="failed", state=state)
            partial.diagnostics = diagnose(net, loader, routing, partial, config, paths)
            partial.diagnostics["runtime_s"] = time.perf_counter() - t0
            raise SolverDivergenceError(
                f"no convergence on [{T:.6g}, {T + a:.6g}] at step {a:.6g} (alpha_min {config.alpha_min:g}); "
                f"last residual {out.residuals[-1]:.3g} after {out.iterations} iterations; "
                f"coherent up to t={T:.6g}",
                partial,
            )
    result = SolveResult(flow, splits, steps, state=state)
    result.diagnostics = diagnose(net, loader, routing, result, config, paths)
    result.diagnostics["runtime_s"] = time.perf_counter() - t0
    return result


# -- diagnostics -------------------------------------------------------------


def conservation_residual(net: Network, flow: Flow, horizon: float) -> np.ndarray:
    """L1 mismatch between routed and arriving flow per (node, commodity)."""
    cut = (0.0, horizon)
    out = np.zeros((len(net.nodes), net.n_commodities))
    for i, com in enumerate(net.commodities):
        for k, v in enumerate(net.nodes):
            leaving = [restrict(flow.inflow[e][i], cut) for e in net.out_edges(v)]
            if v == com.sink:
                arriving: list[RateFunction] = []
            else:
                arriving = [restrict(com.inflow(v), cut)] + [restrict(flow.outflow[e][i], cut) for e in net.in_edges(v)]
            diff = combine(leaving + arriving, [1.0] * len(leaving) + [-1.0] * len(arriving), signed=True)
            out[k, i] = distance(diff, RateFunction.zero(), cut, 1.0)
    return out


@dataclass
class GapReport:
    kind: str
    value: float
    budget: float = 0.0  # Monte-Carlo allowance (stochastic gap only)
    certified: int = 0  # grid points whose split decomposes against its own probabilities
    points: int = 0

    def as_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "value": self.value, "budget": self.budget, "certified": self.certified, "points": self.points}


def _midpoints(points: np.ndarray, sub: int) -> tuple[np.ndarray, np.ndarray]:
    mids, widths = [], []
    for a, b in zip(points[:-1], points[1:]):
        w = (b - a) / sub
        mids.extend(a + w * (np.arange(sub) + 0.5))
        widths.extend([w] * sub)
    return np.asarray(mids), np.asarray(widths)


def dpe_gap(
    net: Network,
    flow: Flow,
    predictor: Predictor,
    state: EdgeState,
    horizon: float,
    paths: PathSet | None = None,
    subdivisions: int = 4,
) -> float:
    """``int sum_{e,i} f+_{e,i} * (best cost via e - best cost)`` over ``[0, horizon]``."""
    paths = paths or PathSet(net)
    pts = [0.0, horizon]
    pts.extend(merged_breakpoints(f for row in flow.inflow for f in row))
    for tr in state.trajectories:
        pts.extend(tr.knots)
    grid = _snap_points([t for t in pts if 0.0 <= t <= horizon])
    mids, widths = _midpoints(grid, subdivisions)
    st = state.with_extrapolation()
    total = 0.0
    for theta, w in zip(mids, widths):
        for i, com in enumerate(net.commodities):
            for v in net.nodes:
                if v == com.sink:
                    continue
                rates = {e: flow.inflow[e][i](theta) for e in net.out_edges(v)}
                if not any(x > 0 for x in rates.values()) or not paths.has_paths(v, i):
                    continue
                act = active_edges(net, paths, predictor, st, v, i, float(theta))
                total += w * sum(x * act.excess.get(e, 0.0) for e, x in rates.items())
    return float(total)


def spe_gap(
    net: Network,
    flow: Flow,
    routing: StochasticRouting,
    state: EdgeState,
    grid: Sequence[float],
    horizon: float,
    paths: PathSet | None = None,
) -> GapReport:
    """Inflow-weighted L1 distance between realized splits and freshly sampled ones.

    Splits are compared at the left end of each grid cell. The fresh
    probabilities use ``seed + 1``, so the value measures Monte-Carlo noise
    plus any genuine misrouting; ``budget`` is three standard errors of the
    difference of two independent estimates.
    """
    paths = paths or PathSet(net)
    cells = _snap_points([t for t in grid if 0 <= t < horizon - SNAP])
    bounds = [*cells, horizon]
    gap = budget = 0.0
    certified = points = 0
    n = routing.samples
    for k, theta in enumerate(cells):
        w = bounds[k + 1] - bounds[k]
        ctx = RoutingContext(net, paths, state, np.zeros(0), np.zeros(0), {})
        for i in range(net.n_commodities):
            for v in net.nodes:
                if not paths.has_paths(v, i):
                    continue
                entry = paths.get(v, i)
                rates = {e: flow.inflow[e][i](theta) for e in entry.out_edges}
                b = sum(rates.values())
                if b <= 1e-12:
                    continue
                realized = {e: x / b for e, x in rates.items()}
                own = routing.probabilities(ctx, v, i, float(theta))
                fresh = routing.probabilities(ctx, v, i, float(theta), seed=routing.seed + 1)
                mandated = stochastic_split(fresh)
                gap += w * b * sum(abs(realized[e] - mandated[e]) for e in entry.out_edges)
                budget += w * b * sum(
                    3 * math.sqrt(2 * p * (1 - p) / n) for p in (fresh.singleton(e) for e in entry.out_edges)
                )
                points += 1
                certified += decompose_split(realized, own).feasible
    return GapReport("spe", float(gap), float(budget), certified, points)


def equilibrium_gap(
    net: Network,
    flow: Flow,
    routing: RoutingOperator,
    loader: EdgeLoader,
    horizon: float,
    grid: Sequence[float] | None = None,
    paths: PathSet | None = None,
    routing_step: float = 0.25,
) -> GapReport:
    paths = paths or PathSet(net)
    _, state = loader.load(net, flow.inflow, horizon)
    if isinstance(routing, StochasticRouting):
        if grid is None:
            grid = np.arange(0.0, horizon, routing_step)
        return spe_gap(net, flow, routing, state, grid, horizon, paths)
    return GapReport("dpe", dpe_gap(net, flow, routing.predictor, state, horizon, paths))


def diagnose(
    net: Network,
    loader: EdgeLoader,
    routing: RoutingOperator,
    result: SolveResult,
    config: SolverConfig,
    paths: PathSet | None = None,
) -> dict[str, Any]:
    H = result.flow.horizon
    if H <= 0:
        zero = np.zeros((len(net.nodes), net.n_commodities))
        return {
            "horizon": 0.0,
            "status": result.status,
            "conservation_residual": zero.tolist(),
            "consistency_residual": np.zeros((net.n_edges, net.n_commodities)).tolist(),
            "max_conservation_residual": 0.0,
            "max_consistency_residual": 0.0,
            "gap": 0.0,
            "gap_report": GapReport("none", 0.0).as_dict(),
            "iterations": [],
        }
    cons = conservation_residual(net, result.flow, H)
    consist = consistency_residual(net, result.flow, loader, H)
    grid = result.splits.grid if len(result.splits.grid) else None
    gap = equilibrium_gap(net, result.flow, routing, loader, H, grid, paths, config.routing_step)
    return {
        "horizon": H,
        "status": result.status,
        "conservation_residual": cons.tolist(),
        "consistency_residual": consist.tolist(),
        "max_conservation_residual": float(cons.max(initial=0.0)),
        "max_consistency_residual": float(consist.max(initial=0.0)),
        "gap": gap.value,
        "gap_report": gap.as_dict(),
        "split_sum_error": result.splits.max_sum_error(),
        "iterations": [s.iterations for s in result.steps],
        "steps": [
            {
                "start": s.start,
                "alpha": s.alpha,
                "converged": s.converged,
                "iterations": s.iterations,
                "residuals": s.residuals,
                "monotone": s.monotone,
            }
            for s in result.steps
        ],
    }

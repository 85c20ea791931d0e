"""Edge-loading operators: Vickrey point queues and affine-linear volume delay.

Both loaders map a vector of edge inflow rates ``f+[e][i]`` to the unique
outflow vector ``f-[e][i]`` of their physical model and expose an edge
state (queue or volume trajectories, travel and exit times) that the
predictors and routing operators consume.
"""

from __future__ import annotations

import copy
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ModelPreconditionError, NumericFailureError, OutOfHorizonError
from .network import Network
from .ratefn import EPS, PiecewiseLinear, RateFunction, cell_midpoints, combine, distance, merged_breakpoints, restrict

Inflows = Sequence[Sequence[RateFunction]]  # [edge][commodity]

#: queue lengths below this are treated as an empty queue
QUEUE_TOL = 1e-10
#: slack allowed when querying exactly at the horizon
HORIZON_TOL = 1e-9


class Flow:
    """Per-(edge, commodity) inflow and outflow rate functions."""

    __slots__ = ("inflow", "outflow", "horizon")

    def __init__(self, inflow: Inflows, outflow: Inflows, horizon: float):
        self.inflow = tuple(tuple(row) for row in inflow)
        self.outflow = tuple(tuple(row) for row in outflow)
        if len(self.inflow) != len(self.outflow):
            raise InputError("inflow and outflow differ in edge count")
        self.horizon = float(horizon)

    @classmethod
    def zero(cls, net: Network, horizon: float = 0.0) -> Flow:
        z = RateFunction.zero()
        rows = [[z] * net.n_commodities for _ in net.edges]
        return cls(rows, rows, horizon)

    @property
    def n_edges(self) -> int:
        return len(self.inflow)

    @property
    def n_commodities(self) -> int:
        return len(self.inflow[0]) if self.inflow else 0

    def aggregate_inflow(self, e: int) -> RateFunction:
        return combine(self.inflow[e], [1.0] * len(self.inflow[e]))

    def aggregate_outflow(self, e: int) -> RateFunction:
        return combine(self.outflow[e], [1.0] * len(self.outflow[e]))

    def restrict(self, horizon: float) -> Flow:
        cut = (0.0, horizon)
        return Flow(
            [[restrict(f, cut) for f in row] for row in self.inflow],
            [[restrict(f, cut) for f in row] for row in self.outflow],
            horizon,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Flow):
            return NotImplemented
        return self.inflow == other.inflow and self.outflow == other.outflow


@dataclass(frozen=True)
class LoaderMetadata:
    causality_offset: float
    is_uniformly_strictly_causal: bool
    capacity_bound: float


class EdgeState:
    """Travel-time information of a loaded network up to ``horizon``."""

    kind = "abstract"

    def __init__(self, net: Network, horizon: float, trajectories: Sequence[PiecewiseLinear]):
        self.net = net
        self.horizon = float(horizon)
        self.trajectories = tuple(trajectories)  # queue length z_e or volume X_e
        self._nu = net.capacities
        self._c0 = net.free_flow_times
        self._extrapolate = False

    def _check(self, theta: float) -> None:
        if theta > self.horizon + HORIZON_TOL and not self._extrapolate:
            raise OutOfHorizonError(f"time {theta} beyond computed horizon {self.horizon}")

    def travel_time(self, e: int, theta: float) -> float:
        self._check(theta)
        return float(self._c0[e] + self.trajectories[e](theta) / self._nu[e])

    def exit_time(self, e: int, theta: float) -> float:
        return theta + self.travel_time(e, theta)

    def travel_times(self, theta: float) -> np.ndarray:
        self._check(theta)
        z = np.array([tr(theta) for tr in self.trajectories])
        return self._c0 + z / self._nu

    def event_times(self, a: float, b: float) -> np.ndarray:
        """Kinks of the travel-time functions strictly inside ``(a, b)``."""
        pts = [tr.knots[(tr.knots > a + EPS) & (tr.knots < b - EPS)] for tr in self.trajectories]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    def cost_slope(self, e: int, theta: float) -> tuple[float, float, float]:
        """Parameters ``(kappa, nu, floor)`` of the right derivative of ``c_e`` at ``theta``.

        With aggregate edge inflow rate ``x`` the travel time grows at rate
        ``max((x - kappa) / nu, floor)``.
        """
        raise NotImplementedError

    def with_extrapolation(self) -> EdgeState:
        """A copy that answers queries past the horizon (no inflow afterwards)."""
        other = copy.copy(self)
        other._extrapolate = True
        return other


class VickreyState(EdgeState):
    kind = "queue"

    def cost_slope(self, e: int, theta: float) -> tuple[float, float, float]:
        self._check(theta)
        nu = float(self._nu[e])
        z = self.trajectories[e](theta)
        return nu, nu, (0.0 if z <= QUEUE_TOL * max(1.0, nu) else -math.inf)


class LinearDelayState(EdgeState):
    kind = "volume"

    def __init__(self, net, horizon, trajectories, outflows: Sequence[RateFunction]):
        super().__init__(net, horizon, trajectories)
        self.aggregate_outflows = tuple(outflows)

    def cost_slope(self, e: int, theta: float) -> tuple[float, float, float]:
        self._check(theta)
        return self.aggregate_outflows[e](theta), float(self._nu[e]), -math.inf


# -- Vickrey -------------------------------------------------------------


def _check_finite(rows: Inflows) -> None:
    for row in rows:
        for f in row:
            if not (np.all(np.isfinite(f.values)) and np.all(np.isfinite(f.breakpoints))):
                raise InputError("non-finite inflow rate")


def _capacity_shares(nu: float, shares: np.ndarray) -> np.ndarray:
    """``nu * shares`` with the floating-point sum kept at or below ``nu``."""
    vals = nu * shares
    while vals.sum() > nu:
        k = int(np.argmax(vals))
        vals[k] = np.nextafter(vals[k], 0.0)
    return vals


def vickrey_edge(
    inflows: Sequence[RateFunction], nu: float, c0: float, horizon: float
) -> tuple[list[RateFunction], PiecewiseLinear]:
    """Exact Vickrey loading of a single edge (FIFO across commodities).

    Returns the commodity outflow rates on ``[0, horizon)`` and the queue
    length trajectory ``z`` indexed by entry time.
    """
    fs = [restrict(f, (0.0, horizon)) for f in inflows]
    grid = merged_breakpoints(fs)
    n_com = len(fs)
    if len(grid) < 2:
        return [RateFunction.zero()] * n_com, PiecewiseLinear([0.0], [0.0])
    left = grid[:-1]
    rates = np.stack([f.values_at(cell_midpoints(grid)) for f in fs], axis=1)  # (pieces, commodities)
    agg = rates.sum(axis=1)

    # entry segments: (start, end, commodity rates, queued?)
    bounds = [float(grid[0])]
    seg_rates: list[np.ndarray] = []
    seg_queued: list[bool] = []
    zs = [0.0]
    z = 0.0
    for k in range(len(left)):
        a, b, r = float(grid[k]), float(grid[k + 1]), float(agg[k])
        if z > 0.0 or r > nu:
            if r >= nu:
                z = z + (r - nu) * (b - a)
                bounds.append(b), seg_rates.append(rates[k]), seg_queued.append(True), zs.append(z)
            else:
                d = a + z / (nu - r)
                if d < b - EPS:
                    bounds.append(d), seg_rates.append(rates[k]), seg_queued.append(True), zs.append(0.0)
                    bounds.append(b), seg_rates.append(rates[k]), seg_queued.append(False), zs.append(0.0)
                    z = 0.0
                else:
                    z = max(0.0, z - (nu - r) * (b - a))
                    if z <= QUEUE_TOL * max(1.0, nu):
                        z = 0.0
                    bounds.append(b), seg_rates.append(rates[k]), seg_queued.append(True), zs.append(z)
        else:
            bounds.append(b), seg_rates.append(rates[k]), seg_queued.append(False), zs.append(0.0)
    if z > 0.0:
        # drain the residual queue after the last inflow piece
        bounds.append(bounds[-1] + z / nu)
        seg_rates.append(np.zeros(n_com))
        seg_queued.append(True)
        zs.append(0.0)

    b_arr = np.asarray(bounds)
    z_arr = np.asarray(zs)
    exits = np.maximum.accumulate(b_arr + z_arr / nu + c0)

    out_bps: list[float] = [float(exits[0])]
    out_vals: list[np.ndarray] = []
    for k, (r_i, queued) in enumerate(zip(seg_rates, seg_queued)):
        lo, hi = exits[k], exits[k + 1]
        if hi - lo <= EPS:
            continue
        if queued:
            tot = r_i.sum()
            vals = _capacity_shares(nu, r_i / tot) if tot > 0 else np.zeros(n_com)
        else:
            vals = r_i
        if lo > out_bps[-1]:
            out_vals.append(np.zeros(n_com))
            out_bps.append(float(lo))
        out_vals.append(vals)
        out_bps.append(float(hi))
    queue = PiecewiseLinear(b_arr, z_arr)
    if not out_vals:
        return [RateFunction.zero()] * n_com, queue
    mat = np.stack(out_vals)
    outs = [restrict(RateFunction(out_bps, mat[:, i]), (0.0, horizon)) for i in range(n_com)]
    return outs, queue


def vickrey_load(net: Network, f_plus: Inflows, horizon: float) -> tuple[list[list[RateFunction]], VickreyState]:
    _check_finite(f_plus)
    outflows = []
    queues = []
    for e in net.edges:
        outs, z = vickrey_edge(f_plus[e.index], e.capacity, e.free_flow_time, horizon)
        outflows.append(outs)
        queues.append(z)
    return outflows, VickreyState(net, horizon, queues)


# -- affine-linear volume delay -------------------------------------------


@dataclass
class LinearDelayEdgeResult:
    outflows: list[RateFunction]
    volume: PiecewiseLinear
    residuals: np.ndarray  # per commodity, max |F+(t) - F-(tau(t))|


def linear_delay_edge(
    inflows: Sequence[RateFunction], nu: float, c0: float, horizon: float, step: float
) -> LinearDelayEdgeResult:
    """Stepwise solution of the volume-delay DDE on a single edge.

    Entry times are tracked on the global grid ``k * step``; the exit-time
    map between grid points is linear in the cumulative functions, and the
    outflow on each grid cell follows from ``F-(t) = F+(tau^-1(t))``.
    """
    if c0 <= 0:
        raise ModelPreconditionError("linear-delay model needs a positive free-flow time")
    if step > c0 + EPS:
        raise ModelPreconditionError(f"step {step} exceeds the free-flow time {c0}")
    n_com = len(inflows)
    fs = [restrict(f, (0.0, horizon)) for f in inflows]
    cums = [f.cumulative() for f in fs]
    n_cells = max(1, int(math.ceil(horizon / step - 1e-9)))
    theta = step * np.arange(n_cells + 1)
    agg = combine(fs, [1.0] * n_com)
    kinks = agg.breakpoints

    Fp = np.stack([c.values_at(theta) for c in cums], axis=1)  # (K+1, I)
    Fm = np.zeros_like(Fp)
    X = np.zeros(n_cells + 1)
    tau = np.zeros(n_cells + 1)
    tau[0] = c0

    def tau_local(j: int, t: float) -> float:
        # exit time of an entry at t in grid cell j (cells <= current step are known)
        w = (t - theta[j]) / step
        fm = (1 - w) * Fm[j].sum() + w * Fm[j + 1].sum()
        return t + c0 + (sum(c(t) for c in cums) - fm) / nu

    def solve_entry(target: float, j: int) -> float:
        lo, hi = np.searchsorted(kinks, [theta[j], theta[j + 1]], side="right")
        inner = [float(x) for x in kinks[lo:hi] if theta[j] < x < theta[j + 1]]
        pts = [theta[j], *inner, theta[j + 1]]
        vals = [tau[j]] + [tau_local(j, x) for x in pts[1:-1]] + [tau[j + 1]]
        for a, b, ta, tb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
            if ta <= target <= tb:
                return a if tb == ta else a + (b - a) * (target - ta) / (tb - ta)
        return pts[-1]

    j = 0
    for k in range(n_cells):
        target = theta[k + 1]
        if target <= tau[0]:
            Fm[k + 1] = 0.0
        else:
            while j < k and tau[j + 1] < target:
                j += 1
            if tau[j + 1] < target:
                raise NumericFailureError("exit-time history does not cover the next grid point")
            xi = solve_entry(target, j)
            Fm[k + 1] = [c(xi) for c in cums]
        Fm[k + 1] = np.minimum(np.maximum(Fm[k + 1], Fm[k]), Fp[k + 1])
        X[k + 1] = Fp[k + 1].sum() - Fm[k + 1].sum()
        tau[k + 1] = theta[k + 1] + c0 + X[k + 1] / nu
        if tau[k + 1] <= tau[k]:
            raise NumericFailureError(f"exit times not increasing at t={theta[k + 1]:.6g}")

    rates = np.diff(Fm, axis=0) / step
    outs = [restrict(RateFunction(theta, np.maximum(rates[:, i], 0.0)), (0.0, horizon)) for i in range(n_com)]

    # volume trajectory including inflow kinks inside cells
    knots = np.unique(np.concatenate((theta, kinks[(kinks > 0) & (kinks < theta[-1])])))
    fm_knots = np.stack([np.interp(knots, theta, Fm[:, i]) for i in range(n_com)], axis=1)
    fp_knots = np.stack([c.values_at(knots) for c in cums], axis=1)
    volume = PiecewiseLinear(knots, (fp_knots - fm_knots).sum(axis=1))

    # "respects travel times" residual on a refined sample of entry times
    sample = np.unique(np.concatenate((knots, 0.5 * (knots[:-1] + knots[1:]))))
    tau_s = sample + c0 + volume.values_at(sample) / nu
    ok = tau_s <= min(horizon, theta[-1])
    resid = np.zeros(n_com)
    if ok.any():
        for i in range(n_com):
            lhs = cums[i].values_at(sample[ok])
            rhs = np.interp(tau_s[ok], theta, Fm[:, i])
            resid[i] = float(np.max(np.abs(lhs - rhs)))
    return LinearDelayEdgeResult(outs, volume, resid)


def linear_delay_load(
    net: Network, f_plus: Inflows, horizon: float, grid_step: float | None = None
) -> tuple[list[list[RateFunction]], LinearDelayState, np.ndarray]:
    """Returns outflows, state and the per-(edge, commodity) travel-time residual."""
    _check_finite(f_plus)
    c0 = net.free_flow_times
    if np.any(c0 <= 0):
        raise ModelPreconditionError("linear-delay model needs all free-flow times > 0")
    step = grid_step if grid_step is not None else float(c0.min()) / 40.0
    if step > c0.min() / 4 + EPS:
        raise ModelPreconditionError(f"grid step {step} exceeds min free-flow time / 4")
    outflows, volumes, aggs, resid = [], [], [], []
    for e in net.edges:
        res = linear_delay_edge(f_plus[e.index], e.capacity, e.free_flow_time, horizon, step)
        outflows.append(res.outflows)
        volumes.append(res.volume)
        aggs.append(combine(res.outflows, [1.0] * len(res.outflows)))
        resid.append(res.residuals)
    state = LinearDelayState(net, horizon, volumes, aggs)
    return outflows, state, np.array(resid).reshape(net.n_edges, net.n_commodities)


# -- loader interface ----------------------------------------------------


class EdgeLoader:
    """Model-agnostic interface used by the solver and the predictors."""

    name = "abstract"

    def validate(self, net: Network) -> None:
        pass

    def load(self, net: Network, f_plus: Inflows, horizon: float) -> tuple[list[list[RateFunction]], EdgeState]:
        raise NotImplementedError

    def metadata(self, net: Network) -> LoaderMetadata:
        c0 = net.free_flow_times
        return LoaderMetadata(
            causality_offset=float(c0.min()) if len(c0) else 0.0,
            is_uniformly_strictly_causal=bool(np.all(c0 > 0)),
            capacity_bound=float(net.capacities.max()) if len(c0) else 0.0,
        )


class VickreyLoader(EdgeLoader):
    name = "vickrey"

    def load(self, net, f_plus, horizon):
        return vickrey_load(net, f_plus, horizon)


class LinearDelayLoader(EdgeLoader):
    name = "linear-delay"

    def __init__(self, step: float | None = None):
        self.step = step

    def validate(self, net: Network) -> None:
        if np.any(net.free_flow_times <= 0):
            raise ModelPreconditionError("linear-delay model needs all free-flow times > 0")

    def load(self, net, f_plus, horizon):
        outflows, state, _ = linear_delay_load(net, f_plus, horizon, self.step)
        return outflows, state


LOADERS: dict[str, Callable[..., EdgeLoader]] = {
    "vickrey": VickreyLoader,
    "linear-delay": LinearDelayLoader,
}


def register_loader(name: str, factory: Callable[..., EdgeLoader]) -> None:
    LOADERS[name] = factory


def make_loader(name: str, **kwargs) -> EdgeLoader:
    try:
        factory = LOADERS[name]
    except KeyError:
        raise InputError(f"unknown physical model {name!r}; choose from {sorted(LOADERS)}") from None
    if name != "linear-delay":
        kwargs.pop("step", None)
    return factory(**kwargs)


def travel_time(state: EdgeState, e: int, theta: float) -> float:
    return state.travel_time(e, theta)


def load_flow(net: Network, loader: EdgeLoader, f_plus: Inflows, horizon: float) -> tuple[Flow, EdgeState]:
    outflows, state = loader.load(net, f_plus, horizon)
    inflow = [[restrict(f, (0.0, horizon)) for f in row] for row in f_plus]
    return Flow(inflow, outflows, horizon), state


def consistency_residual(net: Network, flow: Flow, loader: EdgeLoader, horizon: float) -> np.ndarray:
    """``||f- - Phi(f+)||_1`` over ``[0, horizon]`` per (edge, commodity)."""
    expected, _ = loader.load(net, flow.inflow, horizon)
    out = np.zeros((net.n_edges, net.n_commodities))
    for e in range(net.n_edges):
        for i in range(net.n_commodities):
            out[e, i] = distance(flow.outflow[e][i], expected[e][i], (0.0, horizon), 1.0)
    return out

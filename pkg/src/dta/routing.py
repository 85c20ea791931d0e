"""Routing operators: deterministic prediction routing and noisy-prediction routing.

Deterministic routing picks a split supported on the active edges (first
edges of predicted-cost-minimal paths). Stochastic routing splits flow by
the probability that each edge is perceived as the unique best first edge
when predicted costs are disturbed by independent per-edge noise. A small
max-flow solver certifies whether a given split is admissible for a given
distribution of perceived active sets.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .edge_loading import EdgeState
from .errors import ConfigurationError, InputError
from .network import Network, Node, PathEntry, PathSet
from .predictors import ConstantPredictor, Predictor

DEFAULT_TIE_TOL = 1e-9
MC_TIE_TOL = 1e-12
DEFAULT_SAMPLES = 20_000
MAX_OUT_DEGREE = 12
FEASIBILITY_TOL = 1e-9

Split = dict[int, float]  # out-edge -> fraction


# -- deterministic routing --------------------------------------------------


@dataclass(frozen=True)
class ActiveEdgeSet:
    node: Node
    commodity: int
    theta: float
    edges: tuple[int, ...]
    candidates: tuple[int, ...]  # out-edges that start at least one path to the sink
    excess: Mapping[int, float]  # best cost through e minus the overall best

    def __post_init__(self) -> None:
        if not self.edges:
            raise InputError(f"empty active set at node {self.node!r}")


def active_edges(
    net: Network,
    paths: PathSet,
    predictor: Predictor,
    state: EdgeState,
    v: Node,
    i: int,
    theta: float,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> ActiveEdgeSet:
    """Edges leaving ``v`` that start a path of minimal predicted cost."""
    if v == net.commodities[i].sink:
        raise InputError("active edges are undefined at the commodity sink")
    entry = paths.get(v, i)
    if not entry.paths:
        raise InputError(f"no path from {v!r} to the sink of commodity {i}")
    costs = predictor.path_costs(entry, theta, state)
    best_by_edge = np.full(len(entry.out_edges), math.inf)
    np.minimum.at(best_by_edge, entry.first_edge_index, costs)
    best = float(best_by_edge.min())
    excess = {e: float(best_by_edge[k] - best) for k, e in enumerate(entry.out_edges)}
    active = tuple(e for e in entry.out_edges if excess[e] <= tie_tol)
    return ActiveEdgeSet(v, i, theta, active, entry.out_edges, excess)


def _policy_weights(
    edges: Sequence[int], previous: Mapping[int, float] | None, policy: str, seed: Mapping[int, float] | None
) -> np.ndarray:
    if policy == "uniform":
        return np.ones(len(edges))
    if policy != "sticky":
        raise ConfigurationError(f"unknown tie policy {policy!r}; use uniform or sticky")
    if previous:
        w = np.array([max(previous.get(e, 0.0), 0.0) for e in edges])
        if w.sum() > 0:
            return w
    if seed:
        w = np.array([max(seed.get(e, 0.0), 0.0) for e in edges])
        if w.sum() > 0:
            return w
    return np.ones(len(edges))


def dpe_split(
    active: ActiveEdgeSet,
    previous: Mapping[int, float] | None = None,
    policy: str = "uniform",
    seed_weights: Mapping[int, float] | None = None,
) -> Split:
    """A split supported on the active edges.

    ``uniform`` spreads evenly; ``sticky`` keeps the previous proportions
    among the still-active edges, falling back to ``seed_weights`` (e.g.
    capacities) and then to uniform.
    """
    w = _policy_weights(active.edges, previous, policy, seed_weights)
    split = {e: 0.0 for e in active.candidates}
    for e, x in zip(active.edges, w / w.sum()):
        split[e] = float(x)
    return split


def _capped_share(amount: float, caps: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Distribute ``amount`` proportionally to ``weights`` without exceeding ``caps``."""
    out = np.zeros(len(caps))
    free = caps > 0
    w = np.where(free, weights, 0.0)
    if w.sum() <= 0:
        w = np.where(free, 1.0, 0.0)
    remaining = min(amount, float(caps.sum()))
    while remaining > 1e-15 and free.any():
        ww = np.where(free, w, 0.0)
        if ww.sum() <= 0:
            ww = free.astype(float)
        share = remaining * ww / ww.sum()
        room = caps - out
        over = free & (share >= room)
        if not over.any():
            out += share
            break
        out[over] = caps[over]
        remaining -= float(room[over].sum())
        free &= ~over
    return out


@dataclass
class BalancedSplit:
    """Result of the derivative-balancing selection for one commodity at one time."""

    splits: dict[Node, Split]
    labels: dict[Node, float]  # current shortest travel time to the sink
    slopes: dict[Node, float]  # right derivative of the labels under the chosen split
    excess: dict[int, float]  # c_e + label(head) - label(tail)


def shortest_labels(net: Network, costs: np.ndarray, sink: Node) -> dict[Node, float]:
    """Dijkstra on reversed edges with nonnegative ``costs``."""
    dist = {sink: 0.0}
    heap = [(0.0, 0, sink)]
    order = {v: k for k, v in enumerate(net.nodes)}
    done: set[Node] = set()
    while heap:
        d, _, w = heapq.heappop(heap)
        if w in done:
            continue
        done.add(w)
        for e in net.in_edges(w):
            u = net.edges[e].tail
            nd = d + float(costs[e])
            if nd < dist.get(u, math.inf):
                dist[u] = nd
                heapq.heappush(heap, (nd, order[u], u))
    return dist


def _water_fill(
    b: float, level0: np.ndarray, flatcap: np.ndarray, nu: np.ndarray, tie_weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """Smallest common derivative level ``lam`` at which the edges absorb ``b``.

    Edge ``k`` takes ``flatcap[k] + nu[k] * (lam - level0[k])`` once
    ``lam >= level0[k]``; at a level where edges have a flat stretch, the
    leftover is shared by ``tie_weights``.
    """
    x = np.zeros(len(level0))
    groups = np.unique(level0)
    is_open = np.zeros(len(level0), dtype=bool)
    for lv in groups:
        tol = 1e-12 * max(1.0, abs(lv))
        group = np.abs(level0 - lv) <= tol
        group &= ~is_open
        if not group.any():
            continue
        if is_open.any():
            nu_o = nu[is_open]
            lam = (b - np.sum(flatcap[is_open] - nu_o * level0[is_open])) / nu_o.sum()
            if lam < lv - tol:
                x[is_open] = flatcap[is_open] + nu_o * (lam - level0[is_open])
                return float(lam), np.maximum(x, 0.0)
        below = float(np.sum(flatcap[is_open] + nu[is_open] * (lv - level0[is_open])))
        if below + float(flatcap[group].sum()) >= b - 1e-15:
            x[is_open] = flatcap[is_open] + nu[is_open] * (lv - level0[is_open])
            x[group] = _capped_share(max(b - below, 0.0), flatcap[group], tie_weights[group])
            return float(lv), np.maximum(x, 0.0)
        is_open |= group
    nu_o = nu[is_open]
    lam = (b - np.sum(flatcap[is_open] - nu_o * level0[is_open])) / nu_o.sum()
    x[is_open] = flatcap[is_open] + nu_o * (lam - level0[is_open])
    return float(lam), np.maximum(x, 0.0)


def balanced_ide_split(
    net: Network,
    state: EdgeState,
    i: int,
    theta: float,
    node_inflow: Mapping[Node, float],
    other_inflow: np.ndarray,
    previous: Mapping[Node, Mapping[int, float]] | None = None,
    policy: str = "sticky",
    tie_tol: float = DEFAULT_TIE_TOL,
) -> BalancedSplit | None:
    """Instantaneous-cost split that keeps every used edge active.

    Nodes are processed from the sink backwards through the active
    subgraph. At each node the incoming rate is spread over the active
    edges so that the right derivatives of ``c_e + label(head)`` agree on
    all used edges and are no smaller on the unused ones. Remaining freedom
    (edges with a flat cost derivative) is resolved by the tie policy.
    Returns ``None`` if the active subgraph is cyclic.
    """
    sink = net.commodities[i].sink
    costs = state.travel_times(theta)
    labels = shortest_labels(net, costs, sink)
    act: dict[Node, list[int]] = {}
    excess: dict[int, float] = {}
    for v, lv in labels.items():
        if v == sink:
            continue
        act[v] = []
        for e in net.out_edges(v):
            w = net.edges[e].head
            if w not in labels:
                continue
            h = float(costs[e]) + labels[w] - lv
            excess[e] = h
            if h <= tie_tol:
                act[v].append(e)

    pending = {v: len(es) for v, es in act.items()}
    queue = deque([sink])
    order: list[Node] = []
    while queue:
        w = queue.popleft()
        for e in net.in_edges(w):
            u = net.edges[e].tail
            if u in act and e in act[u]:
                pending[u] -= 1
                if pending[u] == 0:
                    order.append(u)
                    queue.append(u)
    if len(order) != len(act):
        return None

    prev = previous or {}
    slopes: dict[Node, float] = {sink: 0.0}
    splits: dict[Node, Split] = {}
    for v in order:
        es = act[v]
        kap = np.empty(len(es))
        nus = np.empty(len(es))
        floor = np.empty(len(es))
        dw = np.empty(len(es))
        for k, e in enumerate(es):
            kap[k], nus[k], floor[k] = state.cost_slope(e, theta)
            dw[k] = slopes[net.edges[e].head]
        o = np.array([other_inflow[e] for e in es])
        level0 = np.maximum((o - kap) / nus, floor) + dw
        flatcap = np.where(np.isfinite(floor), np.maximum(kap - o + nus * np.where(np.isfinite(floor), floor, 0.0), 0.0), 0.0)
        seed = {e: net.edges[e].capacity for e in es}
        weights = _policy_weights(es, prev.get(v), policy, seed)
        b = float(node_inflow.get(v, 0.0))
        split = {e: 0.0 for e in net.out_edges(v) if net.edges[e].head in labels}
        if b <= 1e-12:
            lam = float(level0.min())
            tie = np.abs(level0 - lam) <= 1e-12 * max(1.0, abs(lam))
            w = np.where(tie, weights, 0.0)
            if w.sum() <= 0:
                w = tie.astype(float)
            for e, x in zip(es, w / w.sum()):
                split[e] = float(x)
        else:
            lam, x = _water_fill(b, level0, flatcap, nus, weights)
            x = x / x.sum()
            for e, xe in zip(es, x):
                split[e] = float(xe)
        slopes[v] = lam
        splits[v] = split
    return BalancedSplit(splits, labels, slopes, excess)


# -- noise and perceived active sets ---------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Independent per-edge additive noise on predicted edge costs."""

    kind: str = "degenerate"
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "gaussian":
            if len(self.params) != 1 or not self.params[0] > 0:
                raise ConfigurationError("gaussian noise needs sigma > 0")
        elif self.kind == "uniform":
            if len(self.params) != 2 or not self.params[1] > self.params[0]:
                raise ConfigurationError("uniform noise needs b > a")
        elif self.kind != "degenerate":
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def gaussian(cls, sigma: float) -> NoiseModel:
        return cls("gaussian", (float(sigma),))

    @classmethod
    def uniform(cls, a: float, b: float) -> NoiseModel:
        return cls("uniform", (float(a), float(b)))

    @property
    def density_bound(self) -> float:
        if self.kind == "gaussian":
            return 1.0 / (self.params[0] * math.sqrt(2 * math.pi))
        if self.kind == "uniform":
            return 1.0 / (self.params[1] - self.params[0])
        return math.inf

    def sample(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.params[0], shape)
        if self.kind == "uniform":
            return rng.uniform(self.params[0], self.params[1], shape)
        return np.zeros(shape)

    def __str__(self) -> str:
        if self.kind == "degenerate":
            return "degenerate"
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)


def parse_noise(spec: str) -> NoiseModel:
    """``gaussian:<sigma>`` | ``uniform:<a>,<b>`` | ``degenerate``."""
    kind, _, arg = spec.partition(":")
    try:
        params = tuple(float(x) for x in arg.split(",")) if arg else ()
    except ValueError:
        raise ConfigurationError(f"bad noise parameters in {spec!r}") from None
    return NoiseModel(kind, params)


@dataclass(frozen=True)
class ActiveSetProbabilities:
    node: Node
    commodity: int
    theta: float
    out_edges: tuple[int, ...]
    probs: Mapping[frozenset[int], float]  # nonempty perceived sets with positive mass
    samples: int
    std_errors: Mapping[frozenset[int], float] = field(default_factory=dict)

    def pi(self, m: frozenset[int] | set[int] | Sequence[int]) -> float:
        return self.probs.get(frozenset(m), 0.0)

    def singleton(self, e: int) -> float:
        return self.probs.get(frozenset((e,)), 0.0)

    def singleton_se(self, e: int) -> float:
        p = self.singleton(e)
        return math.sqrt(p * (1 - p) / self.samples) if self.samples else 0.0


def _theta_words(theta: float) -> list[int]:
    bits = int(np.array(theta, dtype=np.float64).view(np.uint64))
    return [bits >> 32, bits & 0xFFFFFFFF]


def query_rng(seed: int, node_index: int, i: int, theta: float) -> np.random.Generator:
    """Generator derived deterministically from the query coordinates."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), node_index, i, *_theta_words(theta)]))


def perceived_sets_from_costs(
    entry: PathEntry, base_costs: np.ndarray, eps: np.ndarray, tie_tol: float = MC_TIE_TOL
) -> np.ndarray:
    """Bitmask (over ``entry.out_edges`` positions) of the perceived active set per sample."""
    perceived = base_costs[None, :] + eps @ entry.incidence.T  # (N, paths)
    best = perceived.min(axis=1, keepdims=True)
    on = perceived <= best + tie_tol
    d = len(entry.out_edges)
    onehot = np.zeros((len(entry.paths), d))
    onehot[np.arange(len(entry.paths)), entry.first_edge_index] = 1.0
    member = (on.astype(float) @ onehot) > 0
    return member.astype(np.int64) @ (1 << np.arange(d, dtype=np.int64))


def estimate_pi(
    net: Network,
    paths: PathSet,
    predictor: Predictor,
    state: EdgeState,
    noise: NoiseModel,
    v: Node,
    i: int,
    theta: float,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    base_costs: np.ndarray | None = None,
) -> ActiveSetProbabilities:
    """Monte-Carlo distribution of the perceived active edge set at ``(v, i, theta)``."""
    if samples < 1:
        raise InputError("sample count must be >= 1")
    entry = paths.get(v, i)
    if not entry.paths:
        raise InputError(f"no path from {v!r} to the sink of commodity {i}")
    d = len(entry.out_edges)
    if d > MAX_OUT_DEGREE:
        raise ConfigurationError(f"node {v!r} has {d} usable out-edges; at most {MAX_OUT_DEGREE} supported")
    if d == 1:
        m = frozenset(entry.out_edges)
        return ActiveSetProbabilities(v, i, theta, entry.out_edges, {m: 1.0}, samples, {m: 0.0})
    base = predictor.path_costs(entry, theta, state) if base_costs is None else np.asarray(base_costs)
    rng = query_rng(seed, net.node_index(v), i, theta)
    eps = noise.sample(rng, (samples, net.n_edges))
    masks = perceived_sets_from_costs(entry, base, eps)
    codes, counts = np.unique(masks, return_counts=True)
    probs: dict[frozenset[int], float] = {}
    ses: dict[frozenset[int], float] = {}
    for code, cnt in zip(codes.tolist(), counts.tolist()):
        m = frozenset(entry.out_edges[k] for k in range(d) if code >> k & 1)
        p = cnt / samples
        probs[m] = p
        ses[m] = math.sqrt(p * (1 - p) / samples)
    return ActiveSetProbabilities(v, i, theta, entry.out_edges, probs, samples, ses)


def rho(pi: ActiveSetProbabilities, m: Sequence[int] | set[int] | frozenset[int]) -> float:
    """Probability that the perceived active set is contained in ``m``."""
    m = frozenset(m)
    if not m <= set(pi.out_edges):
        raise InputError(f"{sorted(m)} is not a subset of the out-edges {list(pi.out_edges)}")
    return float(sum(p for s, p in pi.probs.items() if s and s <= m))


def stochastic_split(pi: ActiveSetProbabilities) -> Split:
    """Singleton masses, with any tie mass spread evenly over the tied edges."""
    split = {e: 0.0 for e in pi.out_edges}
    for m, p in pi.probs.items():
        for e in m:
            split[e] += p / len(m)
    total = sum(split.values())
    return {e: x / total for e, x in split.items()} if total > 0 else split


# -- max-flow certificate --------------------------------------------------


def max_flow(cap: np.ndarray, source: int, sink: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Edmonds-Karp on a dense capacity matrix.

    Returns the flow value, the flow matrix and the source side of a
    minimum cut (boolean mask of vertices reachable in the residual graph).
    """
    n = len(cap)
    flow = np.zeros_like(cap)
    total = 0.0
    while True:
        parent = np.full(n, -1)
        parent[source] = source
        queue = deque([source])
        while queue and parent[sink] < 0:
            u = queue.popleft()
            for w in np.nonzero((cap[u] - flow[u] > 1e-15) & (parent < 0))[0]:
                parent[w] = u
                queue.append(w)
        if parent[sink] < 0:
            return total, flow, parent >= 0
        push = math.inf
        w = sink
        while w != source:
            u = parent[w]
            push = min(push, cap[u, w] - flow[u, w])
            w = u
        w = sink
        while w != source:
            u = parent[w]
            flow[u, w] += push
            flow[w, u] -= push
            w = u
        total += push


@dataclass(frozen=True)
class Decomposition:
    feasible: bool
    flow_value: float
    weights: Mapping[tuple[frozenset[int], int], float]  # (M, e) -> r_{M,e}
    witness: frozenset[int] | None = None  # M with sum_{e in M} r_e < rho(M)
    violation: float = 0.0


def decompose_split(r: Mapping[int, float], pi: ActiveSetProbabilities) -> Decomposition:
    """Certify ``r`` against ``pi`` by max-flow, or return a violated subset."""
    edges = list(pi.out_edges)
    if len(edges) > MAX_OUT_DEGREE:
        raise ConfigurationError(f"out-degree {len(edges)} exceeds {MAX_OUT_DEGREE}")
    sets = [m for m, p in sorted(pi.probs.items(), key=lambda kv: sorted(kv[0])) if m and p > 0]
    n = 2 + len(sets) + len(edges)
    src, snk = 0, n - 1
    epos = {e: 1 + len(sets) + k for k, e in enumerate(edges)}
    cap = np.zeros((n, n))
    big = 2.0 + sum(abs(x) for x in r.values())
    for k, m in enumerate(sets):
        cap[src, 1 + k] = pi.probs[m]
        for e in m:
            cap[1 + k, epos[e]] = big
    for e in edges:
        cap[epos[e], snk] = max(float(r.get(e, 0.0)), 0.0)
    value, flow, reach = max_flow(cap, src, snk)
    total_r = float(sum(r.get(e, 0.0) for e in edges))
    feasible = abs(value - 1.0) <= FEASIBILITY_TOL and abs(total_r - 1.0) <= FEASIBILITY_TOL
    weights = {
        (m, e): float(flow[1 + k, epos[e]]) for k, m in enumerate(sets) for e in sorted(m) if flow[1 + k, epos[e]] > 0
    }
    if feasible:
        return Decomposition(True, value, weights)
    witness = frozenset(e for e in edges if reach[epos[e]])
    gap = rho(pi, witness) - sum(r.get(e, 0.0) for e in witness)
    if gap <= 0:
        # no subset is violated: the total-sum condition is what fails
        full = frozenset(edges)
        return Decomposition(False, value, weights, None if total_r >= 1 else full, 1.0 - total_r)
    return Decomposition(False, value, weights, witness, float(gap))


def subset_inequalities_hold(r: Mapping[int, float], pi: ActiveSetProbabilities, tol: float = FEASIBILITY_TOL) -> bool:
    """Exhaustive check of ``sum_{e in M} r_e >= rho(M)`` for every M, plus the total."""
    edges = list(pi.out_edges)
    if abs(sum(r.get(e, 0.0) for e in edges) - 1.0) > tol:
        return False
    for k in range(1, len(edges) + 1):
        for m in combinations(edges, k):
            if sum(r.get(e, 0.0) for e in m) < rho(pi, m) - tol:
                return False
    return True


# -- routing operators used by the solver ------------------------------------


@dataclass
class RoutingContext:
    """Everything a routing operator may read when choosing splits at one time."""

    net: Network
    paths: PathSet
    state: EdgeState
    node_inflow: np.ndarray  # (nodes, commodities) rate entering each node at theta
    edge_inflow: np.ndarray  # (edges, commodities) current edge inflow rates at theta
    previous: dict[tuple[Node, int], Split]


@dataclass
class SplitDecision:
    splits: dict[tuple[Node, int], Split]
    excess: dict[tuple[int, int], float] = field(default_factory=dict)  # (edge, commodity) -> cost excess


class RoutingOperator:
    name = "abstract"
    prescriptive = False
    #: whether active-set flips should be inserted as extra grid points
    tracks_events = False
    predictor: Predictor

    def decide(self, ctx: RoutingContext, theta: float) -> SplitDecision:
        raise NotImplementedError


def _routable_nodes(net: Network, paths: PathSet, i: int) -> list[Node]:
    return [v for v in net.nodes if paths.has_paths(v, i)]


class DPERouting(RoutingOperator):
    """Selection from the deterministic prediction routing operator.

    With the constant predictor the split balances cost derivatives so that
    used edges stay active over the next grid cell; other predictors use
    the plain tie policy on the active set.
    """

    name = "dpe"
    tracks_events = True

    def __init__(
        self, predictor: Predictor, tie_policy: str = "sticky", tie_tol: float = DEFAULT_TIE_TOL, balanced: bool = True
    ):
        if tie_policy not in ("uniform", "sticky"):
            raise ConfigurationError(f"unknown tie policy {tie_policy!r}; use uniform or sticky")
        self.predictor = predictor
        self.tie_policy = tie_policy
        self.tie_tol = tie_tol
        self.balanced = balanced

    def decide(self, ctx: RoutingContext, theta: float) -> SplitDecision:
        net = ctx.net
        out = SplitDecision({})
        for i in range(net.n_commodities):
            res = None
            if self.balanced and isinstance(self.predictor, ConstantPredictor):
                b = {v: float(ctx.node_inflow[net.node_index(v), i]) for v in net.nodes}
                others = ctx.edge_inflow.sum(axis=1) - ctx.edge_inflow[:, i]
                prev = {v: s for (v, j), s in ctx.previous.items() if j == i}
                res = balanced_ide_split(net, ctx.state, i, theta, b, others, prev, self.tie_policy, self.tie_tol)
            if res is not None:
                for v, s in res.splits.items():
                    out.splits[(v, i)] = s
                for e, h in res.excess.items():
                    out.excess[(e, i)] = h
                continue
            for v in _routable_nodes(net, ctx.paths, i):
                act = active_edges(net, ctx.paths, self.predictor, ctx.state, v, i, theta, self.tie_tol)
                seed = {e: net.edges[e].capacity for e in act.edges}
                out.splits[(v, i)] = dpe_split(act, ctx.previous.get((v, i)), self.tie_policy, seed)
                for e, h in act.excess.items():
                    out.excess[(e, i)] = h
        return out


class StochasticRouting(RoutingOperator):
    """Noisy-prediction routing; prescriptive for nondegenerate noise."""

    name = "spe"

    def __init__(self, predictor: Predictor, noise: NoiseModel, samples: int = DEFAULT_SAMPLES, seed: int = 0):
        if samples < 1:
            raise InputError("sample count must be >= 1")
        self.predictor = predictor
        self.noise = noise
        self.samples = samples
        self.seed = seed
        self.prescriptive = noise.kind != "degenerate"
        self._cache: dict[tuple, ActiveSetProbabilities] = {}

    def probabilities(self, ctx: RoutingContext, v: Node, i: int, theta: float, seed: int | None = None):
        entry = ctx.paths.get(v, i)
        base = self.predictor.path_costs(entry, theta, ctx.state)
        s = self.seed if seed is None else seed
        key = (v, i, theta, s, base.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            hit = estimate_pi(
                ctx.net, ctx.paths, self.predictor, ctx.state, self.noise, v, i, theta, self.samples, s, base
            )
            if len(self._cache) > 100_000:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def decide(self, ctx: RoutingContext, theta: float) -> SplitDecision:
        out = SplitDecision({})
        for i in range(ctx.net.n_commodities):
            for v in _routable_nodes(ctx.net, ctx.paths, i):
                out.splits[(v, i)] = stochastic_split(self.probabilities(ctx, v, i, theta))
        return out


def make_routing(
    kind: str,
    predictor: Predictor,
    noise: NoiseModel | None = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tie_policy: str = "sticky",
) -> RoutingOperator:
    """``dpe`` | ``spe`` | ``stochastic-ide`` (noisy constant predictor)."""
    if kind == "dpe":
        return DPERouting(predictor, tie_policy)
    if kind in ("spe", "stochastic-ide"):
        if noise is None or noise.kind == "degenerate":
            raise ConfigurationError(f"{kind} routing needs a nondegenerate --noise model")
        pred = ConstantPredictor() if kind == "stochastic-ide" else predictor
        op = StochasticRouting(pred, noise, samples, seed)
        op.name = kind
        return op
    raise ConfigurationError(f"unknown routing {kind!r}; use dpe, spe or stochastic-ide")

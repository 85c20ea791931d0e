"""Network and scenario model: validation, JSON ingestion, simple paths."""

from __future__ import annotations

import json
from collections.abc import Hashable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import (
    CapacityError,
    FreeFlowTimeError,
    InputError,
    PathExplosionError,
    SchemaError,
    UnreachableSinkError,
)
from .ratefn import RateFunction

Node = Hashable
Path_ = tuple[int, ...]

DEFAULT_MAX_PATHS = 10_000

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["nodes", "edges", "commodities"],
    "properties": {
        "nodes": {"type": "array", "items": {"type": ["string", "integer"]}, "minItems": 1},
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "capacity", "free_flow_time"],
                "properties": {
                    "from": {"type": ["string", "integer"]},
                    "to": {"type": ["string", "integer"]},
                    "capacity": {"type": "number"},
                    "free_flow_time": {"type": "number"},
                },
            },
        },
        "commodities": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["sink", "inflows"],
                "properties": {
                    "sink": {"type": ["string", "integer"]},
                    "inflows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["node", "pieces"],
                            "properties": {
                                "node": {"type": ["string", "integer"]},
                                "pieces": {
                                    "type": "array",
                                    "items": {
                                        "type": "array",
                                        "items": {"type": "number"},
                                        "minItems": 3,
                                        "maxItems": 3,
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
        "horizon": {"type": "number", "exclusiveMinimum": 0},
    },
}


@dataclass(frozen=True)
class Edge:
    index: int
    tail: Node
    head: Node
    capacity: float
    free_flow_time: float


@dataclass(frozen=True)
class Commodity:
    sink: Node
    inflows: Mapping[Node, RateFunction] = field(default_factory=dict)

    def inflow(self, v: Node) -> RateFunction:
        return self.inflows.get(v, RateFunction.zero())


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    commodities: tuple[Commodity, ...]
    horizon: float | None = None

    def __post_init__(self) -> None:
        out: dict[Node, list[int]] = {v: [] for v in self.nodes}
        inc: dict[Node, list[int]] = {v: [] for v in self.nodes}
        for e in self.edges:
            out[e.tail].append(e.index)
            inc[e.head].append(e.index)
        object.__setattr__(self, "_out", {v: tuple(es) for v, es in out.items()})
        object.__setattr__(self, "_in", {v: tuple(es) for v, es in inc.items()})
        object.__setattr__(self, "_node_index", {v: k for k, v in enumerate(self.nodes)})

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_commodities(self) -> int:
        return len(self.commodities)

    def out_edges(self, v: Node) -> tuple[int, ...]:
        return self._out[v]  # type: ignore[attr-defined]

    def in_edges(self, v: Node) -> tuple[int, ...]:
        return self._in[v]  # type: ignore[attr-defined]

    def node_index(self, v: Node) -> int:
        return self._node_index[v]  # type: ignore[attr-defined]

    @property
    def capacities(self) -> np.ndarray:
        return np.array([e.capacity for e in self.edges], dtype=float)

    @property
    def free_flow_times(self) -> np.ndarray:
        return np.array([e.free_flow_time for e in self.edges], dtype=float)

    def can_reach(self, target: Node) -> set[Node]:
        """Nodes with a directed path to ``target`` (including itself)."""
        seen = {target}
        stack = [target]
        while stack:
            w = stack.pop()
            for k in self.in_edges(w):
                u = self.edges[k].tail
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen

    def validate(self) -> None:
        for e in self.edges:
            if not e.capacity > 0:
                raise CapacityError(f"edge {e.index} ({e.tail}->{e.head}) has nonpositive capacity {e.capacity}")
            if not e.free_flow_time >= 0:
                raise FreeFlowTimeError(
                    f"edge {e.index} ({e.tail}->{e.head}) has negative free-flow time {e.free_flow_time}"
                )
        for i, com in enumerate(self.commodities):
            if com.sink not in self._node_index:  # type: ignore[attr-defined]
                raise SchemaError(f"commodity {i}: unknown sink {com.sink!r}")
            reach = self.can_reach(com.sink)
            for v, u in com.inflows.items():
                if v not in self._node_index:  # type: ignore[attr-defined]
                    raise SchemaError(f"commodity {i}: inflow at unknown node {v!r}")
                if not u.is_zero and v not in reach:
                    raise UnreachableSinkError(
                        f"commodity {i}: sink {com.sink!r} is unreachable from inflow node {v!r}"
                    )


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return SchemaError(f"scenario schema violation at {where}: {err.message}")


def network_from_document(doc: Mapping[str, Any]) -> Network:
    """Build and validate a :class:`Network` from a parsed scenario document."""
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise _schema_error(errors[0])
    nodes = tuple(doc["nodes"])
    if len(set(nodes)) != len(nodes):
        raise SchemaError("duplicate node identifiers")
    known = set(nodes)
    edges = []
    for k, e in enumerate(doc["edges"]):
        if e["from"] not in known or e["to"] not in known:
            raise SchemaError(f"edge {k} references an unknown node")
        edges.append(Edge(k, e["from"], e["to"], float(e["capacity"]), float(e["free_flow_time"])))
    commodities = []
    for i, c in enumerate(doc["commodities"]):
        inflows: dict[Node, RateFunction] = {}
        for entry in c["inflows"]:
            try:
                u = RateFunction.from_triples(entry["pieces"])
            except InputError as exc:
                raise SchemaError(f"commodity {i}, node {entry['node']!r}: {exc}") from exc
            if not u.is_zero and u.start < 0:
                raise SchemaError(f"commodity {i}: inflow starts before time 0")
            node = entry["node"]
            inflows[node] = inflows[node] + u if node in inflows else u
        commodities.append(Commodity(c["sink"], inflows))
    horizon = float(doc["horizon"]) if "horizon" in doc else None
    net = Network(nodes, tuple(edges), tuple(commodities), horizon)
    net.validate()
    return net


def load_network(document: str | Path | Mapping[str, Any]) -> Network:
    """Load a scenario from a path, a JSON string, or an already parsed mapping."""
    if isinstance(document, Mapping):
        return network_from_document(document)
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        text = Path(document).read_text(encoding="utf-8")
    else:
        text = document
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("scenario document must be a JSON object")
    return network_from_document(doc)


def dump_network(net: Network) -> dict[str, Any]:
    """Inverse of :func:`network_from_document` (canonical form)."""
    doc: dict[str, Any] = {
        "nodes": list(net.nodes),
        "edges": [
            {"from": e.tail, "to": e.head, "capacity": e.capacity, "free_flow_time": e.free_flow_time}
            for e in net.edges
        ],
        "commodities": [
            {
                "sink": c.sink,
                "inflows": [
                    {"node": v, "pieces": u.to_triples()} for v, u in c.inflows.items() if not u.is_zero
                ],
            }
            for c in net.commodities
        ],
    }
    if net.horizon is not None:
        doc["horizon"] = net.horizon
    return doc


def enumerate_paths(net: Network, v: Node, sink: Node, max_paths: int = DEFAULT_MAX_PATHS) -> list[Path_]:
    """All simple ``v``-``sink`` paths as edge-index tuples, lexicographic by edge index."""
    if v == sink:
        raise InputError("path enumeration needs v != sink")
    reach = net.can_reach(sink)
    paths: list[Path_] = []
    if v not in reach:
        return paths
    stack: list[int] = []
    on_path = {v}

    def dfs(u: Node) -> None:
        for k in net.out_edges(u):
            w = net.edges[k].head
            if w in on_path or w not in reach:
                continue
            stack.append(k)
            if w == sink:
                paths.append(tuple(stack))
                if len(paths) > max_paths:
                    raise PathExplosionError(
                        f"more than {max_paths} simple paths from {v!r} to {sink!r}; raise max_paths"
                    )
            else:
                on_path.add(w)
                dfs(w)
                on_path.discard(w)
            stack.pop()

    dfs(v)
    return paths


@dataclass(frozen=True)
class PathEntry:
    """Simple paths from one node to one commodity sink."""

    node: Node
    commodity: int
    paths: tuple[Path_, ...]
    incidence: np.ndarray  # (n_paths, n_edges) 0/1 matrix
    masks: tuple[int, ...]  # per-path edge bitmask
    out_edges: tuple[int, ...]  # edges of delta+(v) starting at least one path
    first_edge_index: np.ndarray  # per path: position of its first edge in out_edges

    def paths_starting_with(self, e: int) -> list[int]:
        k = self.out_edges.index(e)
        return [p for p in range(len(self.paths)) if self.first_edge_index[p] == k]


class PathSet:
    """Lazily computed, cached path sets ``P_{v, t_i}``."""

    def __init__(self, net: Network, max_paths: int = DEFAULT_MAX_PATHS):
        self.net = net
        self.max_paths = max_paths
        self._cache: dict[tuple[Node, int], PathEntry] = {}

    def get(self, v: Node, i: int) -> PathEntry:
        key = (v, i)
        if key not in self._cache:
            sink = self.net.commodities[i].sink
            paths = tuple(enumerate_paths(self.net, v, sink, self.max_paths))
            inc = np.zeros((len(paths), self.net.n_edges))
            masks = []
            for p, path in enumerate(paths):
                inc[p, list(path)] = 1.0
                masks.append(sum(1 << k for k in path))
            firsts = tuple(sorted({path[0] for path in paths}))
            first_idx = np.array([firsts.index(path[0]) for path in paths], dtype=int)
            inc.flags.writeable = False
            first_idx.flags.writeable = False
            self._cache[key] = PathEntry(v, i, paths, inc, tuple(masks), firsts, first_idx)
        return self._cache[key]

    def has_paths(self, v: Node, i: int) -> bool:
        return v != self.net.commodities[i].sink and len(self.get(v, i).paths) > 0

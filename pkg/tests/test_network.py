from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dta.errors import CapacityError, FreeFlowTimeError, PathExplosionError, SchemaError, UnreachableSinkError
from dta.network import PathSet, dump_network, enumerate_paths, load_network

from oracles import count_simple_paths


def single_edge(**edge):
    e = {"from": "s", "to": "t", "capacity": 1, "free_flow_time": 1, **edge}
    return {
        "nodes": ["s", "t"],
        "edges": [e],
        "commodities": [{"sink": "t", "inflows": [{"node": "s", "pieces": [[0, 1, 1]]}]}],
    }


class TestLoad:
    def test_golden_network(self, golden_net):
        assert golden_net.n_edges == 4
        assert [(e.capacity, e.free_flow_time) for e in golden_net.edges] == [(4, 1), (2, 1), (2, 1), (2, 1)]

    def test_single_edge(self):
        net = load_network(single_edge())
        assert net.n_edges == 1 and net.horizon is None

    def test_unreachable_sink(self):
        doc = single_edge()
        doc["nodes"].append("x")
        doc["commodities"][0]["inflows"][0]["node"] = "x"
        with pytest.raises(UnreachableSinkError):
            load_network(doc)

    def test_zero_inflow_at_unreachable_node_is_fine(self):
        doc = single_edge()
        doc["nodes"].append("x")
        doc["commodities"][0]["inflows"].append({"node": "x", "pieces": []})
        load_network(doc)

    def test_nonpositive_capacity(self):
        with pytest.raises(CapacityError):
            load_network(single_edge(capacity=0))

    def test_negative_free_flow_time(self):
        with pytest.raises(FreeFlowTimeError):
            load_network(single_edge(free_flow_time=-1))

    def test_schema_violation(self):
        doc = single_edge()
        del doc["edges"][0]["capacity"]
        with pytest.raises(SchemaError, match="capacity"):
            load_network(doc)

    def test_unknown_node(self):
        doc = single_edge(to="q")
        with pytest.raises(SchemaError):
            load_network(doc)

    def test_malformed_json_reports_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"nodes": [\n  "s",\n  ]\n}')
        with pytest.raises(SchemaError, match=r"line 3, column 3"):
            load_network(p)

    def test_json_string_and_path(self, tmp_path):
        doc = single_edge()
        p = tmp_path / "s.json"
        p.write_text(json.dumps(doc))
        assert dump_network(load_network(p)) == dump_network(load_network(json.dumps(doc)))

    def test_round_trip(self, golden_net):
        again = load_network(dump_network(golden_net))
        assert dump_network(again) == dump_network(golden_net)


class TestPaths:
    def test_golden_two_paths(self, golden_net):
        assert enumerate_paths(golden_net, "s", "t") == [(0, 1), (2, 3)]

    def test_adjacent_single_path(self, golden_net):
        assert enumerate_paths(golden_net, "v", "t") == [(1,)]

    def test_diamond(self):
        doc = {
            "nodes": ["s", "a", "b", "t"],
            "edges": [
                {"from": a, "to": b, "capacity": 1, "free_flow_time": 1}
                for a, b in [("s", "a"), ("s", "b"), ("a", "t"), ("b", "t")]
            ],
            "commodities": [{"sink": "t", "inflows": []}],
        }
        net = load_network(doc)
        paths = enumerate_paths(net, "s", "t")
        assert len(paths) == 2
        assert sorted(paths) == count_simple_paths([("s", "a"), ("s", "b"), ("a", "t"), ("b", "t")], "s", "t")

    def test_explosion_guard(self):
        # complete DAG on 8 nodes has 2^6 = 64 paths from 0 to 7
        edges = [{"from": a, "to": b, "capacity": 1, "free_flow_time": 1} for a in range(8) for b in range(a + 1, 8)]
        net = load_network({"nodes": list(range(8)), "edges": edges, "commodities": [{"sink": 7, "inflows": []}]})
        assert len(enumerate_paths(net, 0, 7)) == 64
        with pytest.raises(PathExplosionError, match="max_paths"):
            enumerate_paths(net, 0, 7, max_paths=10)

    def test_pathset_first_edges(self, golden_net):
        entry = PathSet(golden_net).get("s", 0)
        assert entry.out_edges == (0, 2)
        assert entry.paths_starting_with(2) == [1]
        assert entry.incidence.sum(axis=1).tolist() == [2, 2]


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 8))
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=14))
    return n, chosen


@settings(max_examples=80, deadline=None)
@given(small_graphs())
def test_enumeration_matches_brute_force(graph):
    n, pairs = graph
    doc = {
        "nodes": list(range(n)),
        "edges": [{"from": a, "to": b, "capacity": 1, "free_flow_time": 1} for a, b in pairs],
        "commodities": [{"sink": n - 1, "inflows": []}],
    }
    net = load_network(doc)
    got = enumerate_paths(net, 0, n - 1)
    assert got == sorted(got)
    assert got == count_simple_paths(pairs, 0, n - 1)
    for p in got:
        heads = [pairs[k][1] for k in p]
        assert pairs[p[0]][0] == 0 and heads[-1] == n - 1
        assert len(set(heads)) == len(heads) and 0 not in heads

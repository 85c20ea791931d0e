from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dta.edge_loading import Flow, VickreyLoader, load_flow
from dta.errors import ConfigurationError, SolverDivergenceError
from dta.network import PathSet, load_network
from dta.predictors import ConstantPredictor, PerfectPredictor
from dta.ratefn import RateFunction, distance, restrict
from dta.routing import DPERouting, NoiseModel, StochasticRouting
from dta.solver import (
    SolverConfig,
    banach_iterate,
    conservation_residual,
    dpe_gap,
    extend_pointwise,
    extension_step,
    solve,
)

R = RateFunction.from_triples


def net_with(edges, inflows, nodes=("s", "t"), sink="t"):
    return load_network(
        {
            "nodes": list(nodes),
            "edges": [{"from": a, "to": b, "capacity": nu, "free_flow_time": c0} for a, b, nu, c0 in edges],
            "commodities": [{"sink": sink, "inflows": [{"node": "s", "pieces": p} for p in inflows]}],
        }
    )


def golden_solve(net, **kw):
    return solve(net, VickreyLoader(), DPERouting(ConstantPredictor()), SolverConfig(horizon=3.0, **kw))


# -- fixed-point fixtures ----------------------------------------------------


class TestBanach:
    def test_resolvent_fixture(self):
        ts = np.linspace(0, 0.5, 201)
        res = banach_iterate(lambda x: ts * x + 1, np.zeros_like(ts), 1e-12, 200)
        assert res.converged
        assert np.max(np.abs(res.x - 1 / (1 - ts))) <= 1e-8

    def test_identity_one_iteration(self):
        x0 = np.array([3.0, -1.0, 2.5])
        res = banach_iterate(lambda x: x, x0, 1e-12, 10)
        assert res.converged and res.iterations == 1 and res.residuals == [0.0]
        np.testing.assert_array_equal(res.x, x0)

    def test_geometric_decay(self):
        res = banach_iterate(lambda x: 0.5 * x, np.ones(11), 1e-10, 100)
        assert res.converged and np.max(np.abs(res.x)) < 1e-9
        ratios = np.array(res.residuals[1:]) / np.array(res.residuals[:-1])
        np.testing.assert_allclose(ratios, 0.5)
        assert res.monotone

    def test_reports_non_convergence(self):
        res = banach_iterate(lambda x: 2 * x + 1, np.zeros(3), 1e-9, 5)
        assert not res.converged and res.iterations == 5

    def test_stable_veto(self):
        calls = []
        res = banach_iterate(lambda x: x, np.zeros(2), 1e-9, 10, stable=lambda: calls.append(1) or len(calls) > 2)
        assert res.converged and res.iterations == 3


class TestExtendPointwise:
    def test_converges_on_half_interval(self):
        ext = extend_pointwise(lambda t, x: t * x + 1, 0.5, 0.25, 0.01, tol=1e-12)
        assert np.max(np.abs(ext.values - 1 / (1 - ext.times))) <= 1e-8
        assert ext.horizon == pytest.approx(0.5)

    def test_rejects_unit_interval(self):
        with pytest.raises(SolverDivergenceError) as info:
            extend_pointwise(lambda t, x: t * x + 1, 1.0, 0.25, 1e-3, tol=1e-10, max_iter=200)
        partial = info.value.partial
        assert partial.horizon < 1.0
        assert np.max(np.abs(partial.values - 1 / (1 - partial.times))) <= 1e-6


# -- configuration -----------------------------------------------------------


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"horizon": 0},
            {"horizon": 1, "alpha_min": 2.0},
            {"horizon": 1, "fp_tol": 0},
            {"horizon": 1, "routing_step": 0.5},
            {"horizon": 1, "max_iter": 0},
            {"horizon": 1, "p": 0.5},
            {"horizon": 1, "initial_guess": "random"},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            SolverConfig(**kw)

    def test_perfect_needs_restarts(self, golden_net):
        with pytest.raises(ConfigurationError, match="composite"):
            solve(golden_net, VickreyLoader(), DPERouting(PerfectPredictor()), SolverConfig(horizon=1.0))


# -- extension step ----------------------------------------------------------


class TestExtensionStep:
    def test_zero_inflow(self):
        net = net_with([("s", "t", 1, 1)], [])
        out = extension_step(net, VickreyLoader(), DPERouting(ConstantPredictor()), Flow.zero(net, 0.0), 0.0, 1.0,
                             SolverConfig(horizon=1.0))
        assert out.converged and out.iterations == 1
        assert out.flow.inflow[0][0].is_zero

    def test_single_edge_is_vickrey_load(self):
        net = net_with([("s", "t", 1, 1)], [[[0, 1, 1]]])
        out = extension_step(net, VickreyLoader(), DPERouting(ConstantPredictor()), Flow.zero(net, 0.0), 0.0, 2.0,
                             SolverConfig(horizon=2.0, alpha0=2.0))
        assert out.converged
        assert out.flow.inflow[0][0] == R([[0, 1, 1]])
        expected, _ = load_flow(net, VickreyLoader(), [[R([[0, 1, 1]])]], 2.0)
        assert out.flow.outflow[0][0] == expected.outflow[0][0]

    def test_golden_first_split(self, golden_net):
        out = extension_step(golden_net, VickreyLoader(), DPERouting(ConstantPredictor()),
                             Flow.zero(golden_net, 0.0), 0.0, 1.0, SolverConfig(horizon=3.0))
        assert out.converged
        assert out.splits.at("s", 0, 0.0)[0] == pytest.approx(2 / 3)
        assert out.splits.at("s", 0, 0.5)[2] == pytest.approx(1 / 3)

    def test_pinned_past(self, golden_net):
        routing, cfg = DPERouting(ConstantPredictor()), SolverConfig(horizon=3.0)
        first = extension_step(golden_net, VickreyLoader(), routing, Flow.zero(golden_net, 0.0), 0.0, 1.0, cfg)
        second = extension_step(golden_net, VickreyLoader(), routing, first.flow, 1.0, 1.0, cfg,
                                previous=first.splits.entries[-1])
        for e in range(golden_net.n_edges):
            old = first.flow.inflow[e][0]
            new = restrict(second.flow.inflow[e][0], (0.0, 1.0))
            assert np.array_equal(old.breakpoints, new.breakpoints) and np.array_equal(old.values, new.values)


# -- full solves -------------------------------------------------------------


class TestSolve:
    def test_golden(self, golden_net):
        res = golden_solve(golden_net)
        for theta, upper in [(0.5, 2 / 3), (1.5, 1 / 3), (2.5, 2 / 3)]:
            assert res.splits.at("s", 0, theta)[0] == pytest.approx(upper, abs=1e-6)
        assert res.diagnostics["gap"] <= 1e-6
        assert res.diagnostics["max_conservation_residual"] <= 1e-9
        assert res.diagnostics["max_consistency_residual"] <= 1e-9

    def test_empty_scenario(self):
        net = net_with([("s", "t", 1, 1), ("s", "t", 1, 2)], [])
        res = solve(net, VickreyLoader(), DPERouting(ConstantPredictor()), SolverConfig(horizon=2.0))
        assert all(f.is_zero for row in res.flow.inflow for f in row)
        assert res.diagnostics["max_conservation_residual"] == 0
        assert res.diagnostics["max_consistency_residual"] == 0
        assert res.diagnostics["gap"] == 0

    def test_determinism(self, golden_net):
        a, b = golden_solve(golden_net), golden_solve(golden_net)
        assert a.splits.rows() == b.splits.rows()
        for ra, rb in zip(a.flow.inflow, b.flow.inflow):
            for fa, fb in zip(ra, rb):
                assert np.array_equal(fa.breakpoints, fb.breakpoints) and np.array_equal(fa.values, fb.values)

    def test_grid_refinement_changes_nothing(self, golden_net):
        coarse = golden_solve(golden_net)
        fine = golden_solve(golden_net, routing_step=0.125, alpha_min=0.125)
        for theta in np.linspace(0, 3, 49)[:-1]:
            assert fine.splits.at("s", 0, theta)[0] == pytest.approx(coarse.splits.at("s", 0, theta)[0], abs=1e-9)
        for e in range(golden_net.n_edges):
            assert distance(coarse.flow.inflow[e][0], fine.flow.inflow[e][0], (0, 3), 1) <= 1e-9

    def test_stochastic_interior(self, golden_net):
        routing = StochasticRouting(ConstantPredictor(), NoiseModel.gaussian(0.5), samples=4000, seed=1)
        res = solve(golden_net, VickreyLoader(), routing, SolverConfig(horizon=2.0))
        for theta in (0.0, 0.75, 1.5):
            split = res.splits.at("s", 0, theta)
            assert 0 < split[0] < 1 and 0 < split[2] < 1
        assert res.flow.inflow[0][0](0.0) > 0 and res.flow.inflow[2][0](0.0) > 0
        assert res.diagnostics["max_conservation_residual"] <= 1e-6

    def test_divergence_carries_partial(self, golden_net):
        with pytest.raises(SolverDivergenceError) as info:
            golden_solve(golden_net, max_iter=1)
        partial = info.value.partial
        assert partial.status == "failed" and partial.horizon < 3.0
        assert "conservation_residual" in partial.diagnostics


# -- diagnostics -------------------------------------------------------------


class TestDiagnostics:
    def test_conservation_removed_mass(self, golden_net):
        res = golden_solve(golden_net)
        removed = res.flow.inflow[1][0].integral(0, 3)
        rows = [list(r) for r in res.flow.inflow]
        rows[1][0] = RateFunction.zero()
        cut = Flow(rows, res.flow.outflow, 3.0)
        cons = conservation_residual(golden_net, cut, 3.0)
        assert cons[golden_net.node_index("v"), 0] == pytest.approx(removed)
        assert cons[golden_net.node_index("s"), 0] == pytest.approx(0.0, abs=1e-12)

    def test_zero_flow_zero_demand(self, golden_net):
        net = net_with([("s", "t", 1, 1)], [])
        assert conservation_residual(net, Flow.zero(net, 2.0), 2.0).max() == 0

    def test_dpe_gap_constructed_violation(self):
        net = net_with([("s", "t", 10, 1), ("s", "t", 10, 2)], [[[0, 1, 1]]])
        flow, state = load_flow(net, VickreyLoader(), [[RateFunction.zero()], [R([[0, 1, 1]])]], 5.0)
        assert dpe_gap(net, flow, ConstantPredictor(), state, 5.0, PathSet(net)) == pytest.approx(1.0)

    def test_golden_gap_rechecked(self, golden_net):
        res = golden_solve(golden_net)
        _, state = load_flow(golden_net, VickreyLoader(), res.flow.inflow, 3.0)
        assert dpe_gap(golden_net, res.flow, ConstantPredictor(), state, 3.0) <= 1e-6


# -- properties --------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 8), st.integers(1, 6), st.integers(1, 4))
def test_single_path_solve_matches_loading(rate, nu, c0):
    """With one path the routing is forced, so the solve is a pure loading."""
    net = net_with([("s", "a", nu, c0 / 2), ("a", "t", nu, c0 / 2)], [[[0, 1, rate / 2]]], nodes=("s", "a", "t"))
    res = solve(net, VickreyLoader(), DPERouting(ConstantPredictor()), SolverConfig(horizon=3.0))
    expected, _ = load_flow(net, VickreyLoader(), [[R([[0, 1, rate / 2]])], [res.flow.outflow[0][0]]], 3.0)
    assert distance(res.flow.inflow[1][0], res.flow.outflow[0][0], (0, 3), 1) <= 1e-9
    assert distance(res.flow.outflow[1][0], expected.outflow[1][0], (0, 3), 1) <= 1e-9
    assert res.diagnostics["max_conservation_residual"] <= 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 12), st.sampled_from([0.25, 0.5, 1.0]))
def test_residuals_small_on_random_two_route_scenarios(rate, alpha0):
    net = net_with([("s", "t", 1, 1), ("s", "t", 2, 1.5)], [[[0, 1.5, rate / 2]]])
    res = solve(net, VickreyLoader(), DPERouting(ConstantPredictor()), SolverConfig(horizon=3.0, alpha0=alpha0))
    assert res.diagnostics["max_conservation_residual"] <= 1e-6 * 3
    assert res.diagnostics["max_consistency_residual"] <= 1e-6 * 3
    assert res.diagnostics["split_sum_error"] <= 1e-9

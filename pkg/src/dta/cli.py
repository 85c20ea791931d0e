"""Command-line runner: ``dta solve`` and ``dta verify``.

Exit codes: 0 success, 1 verify found residuals above tolerance (with
``--strict``), 2 invalid input or configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .edge_loading import Flow, consistency_residual, make_loader
from .errors import DTAError, InputError, NumericFailureError, SolverDivergenceError
from .network import Network, PathSet, load_network
from .predictors import parse_predictor
from .ratefn import RateFunction, restrict
from .routing import make_routing, parse_noise
from .solver import SolveResult, SolverConfig, conservation_residual, equilibrium_gap, solve

log = logging.getLogger("dta")

EXIT_OK, EXIT_TOLERANCE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
VERIFY_TOL = 1e-6


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["vickrey", "linear-delay"], default="vickrey")
    p.add_argument("--phys-step", type=float, default=None, help="linear-delay grid step (default min c0 / 40)")
    p.add_argument("--predictor", default="constant", help="constant | perfect | composite:<cutoff>")
    p.add_argument("--routing", choices=["dpe", "spe", "stochastic-ide"], default="dpe")
    p.add_argument("--noise", default=None, help="gaussian:<sigma> | uniform:<a>,<b>")
    p.add_argument("--mc-samples", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tie-policy", choices=["uniform", "sticky"], default="sticky")
    p.add_argument("--horizon", type=float, default=None, help="overrides the scenario horizon")
    p.add_argument("--routing-step", type=float, default=0.25)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dta", description="Coherent dynamic traffic flows.")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="compute a coherent flow for a scenario")
    ps.add_argument("scenario", type=Path)
    _add_model_flags(ps)
    ps.add_argument("--alpha0", type=float, default=1.0)
    ps.add_argument("--alpha-min", type=float, default=0.25)
    ps.add_argument("--fp-tol", type=float, default=1e-9)
    ps.add_argument("--max-iter", type=int, default=200)
    ps.add_argument("--initial-guess", choices=["extrapolate", "zero"], default="extrapolate")
    ps.add_argument("--outer-restarts", type=int, default=0, help="whole-horizon passes for the perfect predictor")
    ps.add_argument("--out", type=Path, required=True)

    pv = sub.add_parser("verify", help="recompute residuals and gaps of a flow file")
    pv.add_argument("scenario", type=Path)
    pv.add_argument("flow", type=Path)
    _add_model_flags(pv)
    pv.add_argument("--strict", action="store_true", help="exit 1 if a residual exceeds 1e-6 per unit horizon")
    return parser


def _threads() -> int:
    raw = os.environ.get("DTA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"DTA_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"DTA_THREADS must be a positive integer, got {raw!r}")
    return n


def _horizon(args: argparse.Namespace, net: Network, fallback: float | None = None) -> float:
    h = args.horizon if args.horizon is not None else net.horizon if net.horizon is not None else fallback
    if h is None:
        raise InputError("no horizon: set it in the scenario or pass --horizon")
    return float(h)


def _components(args: argparse.Namespace, net: Network):
    loader = make_loader(args.model, step=args.phys_step)
    loader.validate(net)
    predictor = parse_predictor(args.predictor)
    noise = parse_noise(args.noise) if args.noise else None
    routing = make_routing(args.routing, predictor, noise, args.mc_samples, args.seed, args.tie_policy)
    return loader, routing


# -- serialization -----------------------------------------------------------


def flow_to_json(net: Network, flow: Flow) -> dict[str, Any]:
    return {
        "horizon": flow.horizon,
        "flows": [
            {
                "edge": e,
                "from": net.edges[e].tail,
                "to": net.edges[e].head,
                "commodity": i,
                "inflow": flow.inflow[e][i].to_triples(),
                "outflow": flow.outflow[e][i].to_triples(),
            }
            for e in range(net.n_edges)
            for i in range(net.n_commodities)
        ],
    }


def flow_from_json(net: Network, doc: dict[str, Any]) -> Flow:
    try:
        entries = doc["flows"]
        horizon = float(doc["horizon"])
        zero = RateFunction.zero()
        inflow = [[zero] * net.n_commodities for _ in net.edges]
        outflow = [[zero] * net.n_commodities for _ in net.edges]
        for ent in entries:
            e, i = int(ent["edge"]), int(ent["commodity"])
            if not (0 <= e < net.n_edges and 0 <= i < net.n_commodities):
                raise InputError(f"flow entry (edge {e}, commodity {i}) does not match the network")
            inflow[e][i] = RateFunction.from_triples(ent["inflow"])
            outflow[e][i] = RateFunction.from_triples(ent["outflow"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DTAError):
            raise
        raise InputError(f"malformed flow file: {exc}") from exc
    return Flow(inflow, outflow, horizon)


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_outputs(out: Path, net: Network, result: SolveResult, manifest: dict[str, Any]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "flow.json", flow_to_json(net, result.flow))
    with open(out / "splits.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "node", "commodity", "edge", "r"])
        for theta, v, i, e, r in result.splits.rows():
            w.writerow([repr(theta), v, i, e, repr(r)])
    with open(out / "queues.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        kind = result.state.kind if result.state is not None else "queue"
        w.writerow(["theta", "edge", kind])
        if result.state is not None:
            H = result.horizon
            for e, tr in enumerate(result.state.trajectories):
                ts = np.unique(np.concatenate(([0.0], tr.knots[(tr.knots >= 0) & (tr.knots <= H)], [H])))
                for t, z in zip(ts, tr.values_at(ts)):
                    w.writerow([repr(float(t)), e, repr(float(z))])
    diag = {k: v for k, v in result.diagnostics.items() if k != "runtime_s"}
    _write_json(out / "diagnostics.json", diag)
    _write_json(out / "manifest.json", manifest)


# -- commands ----------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    threads = _threads()
    net = load_network(args.scenario)
    horizon = _horizon(args, net)
    loader, routing = _components(args, net)
    config = SolverConfig(
        horizon=horizon,
        alpha0=args.alpha0,
        alpha_min=args.alpha_min,
        fp_tol=args.fp_tol,
        max_iter=args.max_iter,
        routing_step=args.routing_step,
        initial_guess=args.initial_guess,
        outer_restarts=args.outer_restarts,
    )
    t_setup = time.perf_counter()
    manifest: dict[str, Any] = {
        "scenario": str(args.scenario),
        "model": args.model,
        "phys_step": args.phys_step,
        "routing": args.routing,
        "predictor": args.predictor,
        "noise": args.noise,
        "mc_samples": args.mc_samples,
        "seed": args.seed,
        "tie_policy": args.tie_policy,
        "solver": {
            "horizon": config.horizon,
            "alpha0": config.alpha0,
            "alpha_min": config.alpha_min,
            "fp_tol": config.fp_tol,
            "max_iter": config.max_iter,
            "routing_step": config.routing_step,
            "p": config.p,
            "initial_guess": config.initial_guess,
            "outer_restarts": config.outer_restarts,
        },
        "threads": threads,
        "version": __version__,
    }
    code = EXIT_OK
    try:
        result = solve(net, loader, routing, config)
    except SolverDivergenceError as exc:
        log.error("solver failure: %s", exc)
        result = exc.partial
        code = EXIT_SOLVER
        manifest["error"] = str(exc)
    t_solve = time.perf_counter()
    manifest["status"] = result.status
    manifest["achieved_horizon"] = result.horizon
    manifest["timings"] = {
        "setup_s": t_setup - t0,
        "solve_s": t_solve - t_setup,
        "total_s": time.perf_counter() - t0,
    }
    write_outputs(args.out, net, result, manifest)
    d = result.diagnostics
    print(
        f"{result.status}: horizon {result.horizon:g}, gap {d.get('gap', 0.0):.3g}, "
        f"conservation {d.get('max_conservation_residual', 0.0):.3g}, "
        f"consistency {d.get('max_consistency_residual', 0.0):.3g} -> {args.out}"
    )
    if code == EXIT_SOLVER:
        print(f"solver failed; partial result up to t={result.horizon:g}", file=sys.stderr)
    return code


def cmd_verify(args: argparse.Namespace) -> int:
    net = load_network(args.scenario)
    try:
        doc = json.loads(args.flow.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed flow JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    flow = flow_from_json(net, doc)
    horizon = _horizon(args, net, flow.horizon)
    loader, routing = _components(args, net)
    cut = (0.0, horizon)
    flow = Flow(
        [[restrict(f, cut) for f in row] for row in flow.inflow],
        [[restrict(f, cut) for f in row] for row in flow.outflow],
        horizon,
    )
    cons = conservation_residual(net, flow, horizon)
    consist = consistency_residual(net, flow, loader, horizon)
    gap = equilibrium_gap(net, flow, routing, loader, horizon, None, PathSet(net), args.routing_step)
    limit = VERIFY_TOL * horizon
    report = {
        "horizon": horizon,
        "conservation_residual": cons.tolist(),
        "consistency_residual": consist.tolist(),
        "max_conservation_residual": float(cons.max(initial=0.0)),
        "max_consistency_residual": float(consist.max(initial=0.0)),
        "gap": gap.value,
        "gap_report": gap.as_dict(),
        "within_tolerance": bool(cons.max(initial=0.0) <= limit and consist.max(initial=0.0) <= limit),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.strict and not report["within_tolerance"]:
        return EXIT_TOLERANCE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_verify(args)
    except NumericFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DTAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

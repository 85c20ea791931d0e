"""Independent reference computations used to derive expected test values.

These deliberately avoid the package's event sweeps and closed forms:
they march in small time steps or enumerate exhaustively.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
from scipy.optimize import linprog


def piecewise_values(triples, ts):
    """Right-continuous value of ``[[t0, t1, rate], ...]`` at times ``ts``."""
    out = np.zeros_like(ts, dtype=float)
    for t0, t1, r in triples:
        out[(ts >= t0) & (ts < t1)] += r
    return out


def vickrey_march(triples_per_commodity, nu, c0, horizon, dt=1e-4):
    """Fine-step point queue with FIFO commodity split.

    Returns the grid, per-commodity outflow rates on each cell
    ``[k dt, (k+1) dt)`` and the queue length at the edge head at grid
    points (the queue met by a particle entering ``c0`` earlier).
    """
    n = int(round(horizon / dt))
    ts = np.arange(n + 1) * dt
    mids = ts[:-1] + dt / 2
    rates = np.array([piecewise_values(tr, mids) for tr in triples_per_commodity])  # (I, n)
    cum_in = np.concatenate((np.zeros((len(rates), 1)), np.cumsum(rates * dt, axis=1)), axis=1)
    agg_in = cum_in.sum(axis=0)
    # cumulative arrivals at the queue head c0 later
    shift = int(round(c0 / dt))
    arrivals = np.concatenate((np.zeros(shift), agg_in))[: n + 1]
    # D_k = min(A_k, D_{k-1} + nu dt), unrolled as a running minimum
    slack = np.minimum.accumulate(arrivals - nu * dt * np.arange(n + 1))
    dep = np.minimum(arrivals, nu * dt * np.arange(n + 1) + slack)
    queue = arrivals - dep
    # FIFO: the particle leaving with cumulative count D entered when the aggregate count was D
    outs = []
    for ci in cum_in:
        entered = np.interp(dep, agg_in, ci, left=0.0, right=ci[-1]) if agg_in[-1] > 0 else np.zeros(n + 1)
        outs.append(np.maximum(np.diff(entered) / dt, 0.0))  # interpolation round-off can dip below zero
    return ts, np.array(outs), queue


def count_simple_paths(edges, source, sink):
    """Brute-force DFS over node sequences (independent of edge ordering)."""
    adj = {}
    for k, (a, b) in enumerate(edges):
        adj.setdefault(a, []).append((k, b))
    found = []

    def walk(u, seen, path):
        if u == sink:
            found.append(tuple(path))
            return
        for k, w in adj.get(u, []):
            if w not in seen:
                walk(w, seen | {w}, path + [k])

    walk(source, {source}, [])
    return sorted(found)


def lp_feasible(pi: dict[frozenset, float], r: dict[int, float]) -> bool:
    """Feasibility of ``sum_e w[M,e] = pi_M``, ``sum_M w[M,e] = r_e``, ``w >= 0`` by LP."""
    variables = [(m, e) for m in pi for e in sorted(m)]
    edges = sorted(r)
    a_eq, b_eq = [], []
    for m, p in pi.items():
        a_eq.append([1.0 if v[0] == m else 0.0 for v in variables])
        b_eq.append(p)
    for e in edges:
        a_eq.append([1.0 if v[1] == e else 0.0 for v in variables])
        b_eq.append(r[e])
    res = linprog(np.zeros(len(variables)), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * len(variables))
    return res.status == 0


def subset_condition(pi: dict[frozenset, float], r: dict[int, float], tol=1e-9) -> bool:
    """Every subset carries at least the mass of perceived sets it contains."""
    edges = sorted(r)
    if abs(sum(r.values()) - 1.0) > tol:
        return False
    for k in range(1, len(edges) + 1):
        for m in combinations(edges, k):
            need = sum(p for s, p in pi.items() if s <= set(m))
            if sum(r[e] for e in m) < need - tol:
                return False
    return True


def triangular_cdf(x: float, half_width: float) -> float:
    """CDF of the difference of two iid uniform(-h, h) variables."""
    w = 2 * half_width
    if x <= -w:
        return 0.0
    if x >= w:
        return 1.0
    if x <= 0:
        return (x + w) ** 2 / (2 * w * w)
    return 1 - (w - x) ** 2 / (2 * w * w)


def normal_cdf(x: float) -> float:
    return 0.5 * (1 + math.erf(x / math.sqrt(2)))

"""Piecewise-constant rate functions and their piecewise-linear cumulatives.

A :class:`RateFunction` is right-continuous, nonnegative and zero outside
``[breakpoints[0], breakpoints[-1])``.  Every flow quantity of the engine
(edge in/outflow rates, network inflow rates, split fractions) lives in
this class, so the operations here are exact up to floating point.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np

from .errors import InputError, NonnegativityError, OutOfRangeError

#: tolerance used to merge adjacent equal values and to drop degenerate pieces
EPS = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _canonical(
    bps: np.ndarray, vals: np.ndarray, *, allow_negative: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Drop tiny pieces, merge equal neighbours, trim zero ends."""
    if len(vals) == 0:
        return np.empty(0), np.empty(0)
    if not allow_negative:
        vals = np.where(np.abs(vals) <= EPS, 0.0, vals)
    keep_b = [bps[0]]
    keep_v: list[float] = []
    for k in range(len(vals)):
        a, b, v = bps[k], bps[k + 1], float(vals[k])
        if b - a <= EPS:
            # absorb a degenerate piece into its predecessor
            if keep_v:
                keep_b[-1] = b
            else:
                keep_b[0] = b
            continue
        if keep_v and abs(keep_v[-1] - v) <= EPS:
            keep_b[-1] = b
            continue
        keep_v.append(v)
        keep_b.append(b)
    # trim zero pieces at both ends
    lo, hi = 0, len(keep_v)
    while lo < hi and keep_v[lo] == 0.0:
        lo += 1
    while hi > lo and keep_v[hi - 1] == 0.0:
        hi -= 1
    if lo == hi:
        return np.empty(0), np.empty(0)
    return np.asarray(keep_b[lo : hi + 1], dtype=float), np.asarray(keep_v[lo:hi], dtype=float)


class RateFunction:
    """Right-continuous piecewise-constant function, zero outside its pieces.

    ``breakpoints`` has one more entry than ``values``; piece ``k`` covers
    ``[breakpoints[k], breakpoints[k+1])``.  Instances are immutable and
    always in canonical form.
    """

    __slots__ = ("breakpoints", "values", "_cum")

    def __init__(self, breakpoints: Iterable[float], values: Iterable[float], *, signed: bool = False):
        bps = np.asarray(list(breakpoints), dtype=float)
        vals = np.asarray(list(values), dtype=float)
        if len(vals) == 0 and len(bps) <= 1:
            bps = np.empty(0)
        elif len(bps) != len(vals) + 1:
            raise InputError("need exactly one more breakpoint than values")
        if not (np.all(np.isfinite(bps)) and np.all(np.isfinite(vals))):
            raise InputError("rate function data must be finite")
        if len(bps) > 1 and np.any(np.diff(bps) <= 0):
            raise InputError("breakpoints must be strictly increasing")
        if not signed and len(vals) and vals.min() < -EPS:
            raise NonnegativityError(f"negative rate {vals.min():.3g}")
        bps, vals = _canonical(bps, vals, allow_negative=signed)
        self.breakpoints = _frozen(bps)
        self.values = _frozen(vals)
        self._cum: CumulativeFunction | None = None

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls) -> RateFunction:
        return cls([], [])

    @classmethod
    def constant(cls, value: float, start: float, end: float) -> RateFunction:
        if end <= start or value == 0:
            return cls.zero()
        return cls([start, end], [value])

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> RateFunction:
        """Build from ``[t_start, t_end, value]`` triples; gaps are zero."""
        pieces = sorted((float(a), float(b), float(v)) for a, b, v in triples)
        bps: list[float] = []
        vals: list[float] = []
        for a, b, v in pieces:
            if b <= a:
                raise InputError(f"empty or reversed interval [{a}, {b})")
            if bps:
                if a < bps[-1] - EPS:
                    raise InputError(f"overlapping intervals at t={a}")
                if a > bps[-1]:
                    vals.append(0.0)
                    bps.append(a)
            else:
                bps.append(a)
            vals.append(v)
            bps.append(b)
        return cls(bps, vals)

    # -- basic queries ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return len(self.values) == 0

    @property
    def start(self) -> float:
        return float(self.breakpoints[0]) if len(self.breakpoints) else 0.0

    @property
    def end(self) -> float:
        return float(self.breakpoints[-1]) if len(self.breakpoints) else 0.0

    def __call__(self, t: float) -> float:
        return evaluate(self, t)

    def __repr__(self) -> str:
        inner = ", ".join(
            f"[{a:g},{b:g}):{v:g}"
            for a, b, v in zip(self.breakpoints[:-1], self.breakpoints[1:], self.values)
        )
        return f"RateFunction({{{inner}}})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RateFunction):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self) -> int:
        return hash((self.breakpoints.tobytes(), self.values.tobytes()))

    def pieces(self) -> Iterable[tuple[float, float, float]]:
        for a, b, v in zip(self.breakpoints[:-1], self.breakpoints[1:], self.values):
            yield float(a), float(b), float(v)

    def to_triples(self) -> list[list[float]]:
        return [[a, b, v] for a, b, v in self.pieces() if v != 0.0]

    def values_at(self, ts: np.ndarray) -> np.ndarray:
        """Vectorised right-continuous evaluation."""
        ts = np.asarray(ts, dtype=float)
        if self.is_zero:
            return np.zeros_like(ts)
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        out = np.zeros_like(ts)
        out[inside] = self.values[idx[inside]]
        return out

    def left_limit(self, t: float) -> float:
        """Value on the piece ending at ``t`` (the limit from the left)."""
        if self.is_zero:
            return 0.0
        k = int(np.searchsorted(self.breakpoints, t, side="left")) - 1
        if 0 <= k < len(self.values):
            return float(self.values[k])
        return 0.0

    def integral(self, a: float = -math.inf, b: float = math.inf) -> float:
        if self.is_zero or b <= a:
            return 0.0
        lo = np.clip(self.breakpoints[:-1], a, b)
        hi = np.clip(self.breakpoints[1:], a, b)
        return float(np.sum(self.values * (hi - lo)))

    def max(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0

    def cumulative(self) -> CumulativeFunction:
        if self._cum is None:
            self._cum = cumulative(self)
        return self._cum

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: RateFunction) -> RateFunction:
        return combine([self, other], [1.0, 1.0])

    def __sub__(self, other: RateFunction) -> RateFunction:
        return combine([self, other], [1.0, -1.0])

    def scale(self, c: float) -> RateFunction:
        if c < 0:
            raise NonnegativityError("scaling by a negative factor")
        return RateFunction(self.breakpoints, self.values * c)

    def multiply(self, other: RateFunction) -> RateFunction:
        """Pointwise product of two piecewise-constant functions."""
        if self.is_zero or other.is_zero:
            return RateFunction.zero()
        grid = merged_breakpoints([self, other])
        mids = cell_midpoints(grid)
        return RateFunction(grid, self.values_at(mids) * other.values_at(mids))

    def shift(self, delta: float) -> RateFunction:
        return RateFunction(self.breakpoints + delta, self.values)


def merged_breakpoints(fs: Iterable[RateFunction]) -> np.ndarray:
    arrays = [f.breakpoints for f in fs if not f.is_zero]
    if not arrays:
        return np.empty(0)
    grid = np.unique(np.concatenate(arrays))
    if len(grid) > 1:
        # collapse points closer than EPS so that no degenerate piece appears
        keep = np.concatenate(([True], np.diff(grid) > EPS))
        grid = grid[keep]
    return grid


def cell_midpoints(grid: np.ndarray) -> np.ndarray:
    """Sample points for the cells of a merged grid.

    Midpoints rather than left ends: a collapsed near-duplicate breakpoint
    can leave a sliver piece just right of a grid point, and sampling there
    would smear its value over the whole cell.
    """
    return 0.5 * (grid[:-1] + grid[1:])


class PiecewiseLinear:
    """Continuous piecewise-linear function through ``(knots, values)``.

    Outside the knot range it is extended by constants.
    """

    __slots__ = ("knots", "values")

    def __init__(self, knots: Iterable[float], values: Iterable[float]):
        k = np.asarray(list(knots), dtype=float)
        v = np.asarray(list(values), dtype=float)
        if len(k) != len(v):
            raise InputError("knots and values differ in length")
        if len(k) == 0:
            k, v = np.array([0.0]), np.array([0.0])
        if np.any(np.diff(k) < 0):
            raise InputError("knots must be nondecreasing")
        self.knots = _frozen(k)
        self.values = _frozen(v)

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.knots, self.values))

    def values_at(self, ts: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(ts, dtype=float), self.knots, self.values)

    def slope_right(self, t: float) -> float:
        """Right derivative at ``t``."""
        k = int(np.searchsorted(self.knots, t, side="right"))
        if k <= 0 or k >= len(self.knots):
            return 0.0
        dt = self.knots[k] - self.knots[k - 1]
        return float((self.values[k] - self.values[k - 1]) / dt) if dt > 0 else 0.0

    def __repr__(self) -> str:
        return f"{type(self).__name__}(knots={self.knots.tolist()}, values={self.values.tolist()})"


class CumulativeFunction(PiecewiseLinear):
    """Nondecreasing cumulative of a rate function; 0 at and before time 0."""

    def inverse_at(self, y: float) -> float:
        return inverse_at(self, y)

    @property
    def total(self) -> float:
        return float(self.values[-1])


# -- module-level operations ---------------------------------------------


def evaluate(f: RateFunction, t: float) -> float:
    """Right-continuous value of ``f`` at ``t``; zero outside the support."""
    if f.is_zero:
        return 0.0
    k = int(np.searchsorted(f.breakpoints, t, side="right")) - 1
    if 0 <= k < len(f.values):
        return float(f.values[k])
    return 0.0


def cumulative(f: RateFunction) -> CumulativeFunction:
    if f.is_zero:
        return CumulativeFunction([0.0], [0.0])
    if f.start < 0:
        raise InputError("cumulative needs a rate function supported in [0, inf)")
    areas = np.concatenate(([0.0], np.cumsum(f.values * np.diff(f.breakpoints))))
    knots = f.breakpoints
    if knots[0] > 0:
        knots = np.concatenate(([0.0], knots))
        areas = np.concatenate(([0.0], areas))
    return CumulativeFunction(knots, areas)


def inverse_at(F: PiecewiseLinear, y: float, tol: float = 1e-9) -> float:
    """Smallest ``t >= 0`` with ``F(t) = y`` for a nondecreasing ``F``."""
    vals = F.values
    lo, hi = float(vals[0]), float(vals[-1])
    if y < lo - tol or y > hi + tol:
        raise OutOfRangeError(f"value {y} outside range [{lo}, {hi}]")
    if y <= lo:
        # constant extension to the left: time 0 is already a preimage
        return 0.0
    y = min(y, hi)
    k = int(np.searchsorted(vals, y, side="left"))
    t0, t1 = F.knots[k - 1], F.knots[k]
    v0, v1 = vals[k - 1], vals[k]
    if v1 == v0:
        return float(t0)
    return float(t0 + (t1 - t0) * (y - v0) / (v1 - v0))


def combine(fs: Sequence[RateFunction], coeffs: Sequence[float], *, signed: bool = False) -> RateFunction:
    """Exact linear combination ``sum(c * f)``.

    Raises :class:`NonnegativityError` if the result drops below ``-1e-12``
    unless ``signed`` is set.
    """
    if len(fs) != len(coeffs):
        raise InputError("one coefficient per function required")
    pairs = [(f, float(c)) for f, c in zip(fs, coeffs) if c != 0.0 and not f.is_zero]
    if not pairs:
        return RateFunction.zero()
    if len(pairs) == 1 and pairs[0][1] == 1.0:
        return pairs[0][0]
    grid = merged_breakpoints([f for f, _ in pairs])
    mids = cell_midpoints(grid)
    total = np.zeros(len(mids))
    for f, c in pairs:
        total += c * f.values_at(mids)
    if not signed:
        if len(total) and total.min() < -EPS:
            raise NonnegativityError(f"linear combination is negative ({total.min():.3g})")
        total = np.maximum(total, 0.0)
    return RateFunction(grid, total, signed=signed)


def distance(
    f: RateFunction, g: RateFunction, interval: tuple[float, float], p: float = 1.0
) -> float:
    """Exact ``||f - g||_p`` over ``interval``; ``p`` may be ``math.inf``."""
    a, b = interval
    if b <= a:
        return 0.0
    grid = merged_breakpoints([f, g])
    grid = np.unique(np.clip(np.concatenate((grid, [a, b])), a, b))
    if len(grid) < 2:
        return 0.0
    mids = cell_midpoints(grid)
    widths = np.diff(grid)
    diff = np.abs(f.values_at(mids) - g.values_at(mids))
    if math.isinf(p):
        mask = widths > 0
        return float(diff[mask].max()) if mask.any() else 0.0
    if p <= 0:
        raise InputError("norm exponent must be positive")
    return float(np.sum(widths * diff**p) ** (1.0 / p))


def restrict(f: RateFunction, interval: tuple[float, float]) -> RateFunction:
    """``1_[a,b) * f``."""
    a, b = interval
    if f.is_zero or b <= a or b <= f.start or a >= f.end:
        return RateFunction.zero()
    lo, hi = max(a, f.start), min(b, f.end)
    bps = f.breakpoints
    grid = np.concatenate(([lo], bps[(bps > lo) & (bps < hi)], [hi]))
    return RateFunction(grid, f.values_at(grid[:-1]))


def step_function(boundaries: Sequence[float], values: Sequence[float]) -> RateFunction:
    """Piecewise-constant function from cell boundaries and per-cell values."""
    return RateFunction(boundaries, values)

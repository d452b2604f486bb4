"""Square-root slope transform and the warping group action.

The transform q = sign(f')sqrt(|f'|) linearizes the elastic geometry:
warping both functions by the same gamma leaves the L2 distance between
their transforms unchanged, which is what makes registration by plain L2
minimization meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridMismatch
from .funcore import Curve, TimeGrid, _frozen, l2_distance

# Minimum increment between consecutive warp values; keeps sqrt(gamma') and
# the warp-sphere distance well-defined when a warp is locally flat.
WARP_SLOPE_GUARD = 1e-6


def _derivative(values: np.ndarray, step: float) -> np.ndarray:
    """Central differences interiorly, second-order one-sided at the ends."""
    return np.gradient(values, step, edge_order=2)


@dataclass(frozen=True)
class Srsf:
    """Square-root slope representation of a curve."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size != self.grid.size:
            raise ValueError("values must match the grid length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")


def _repair_monotone(values: np.ndarray, guard: float) -> np.ndarray:
    """Lift locally flat or reversed stretches to a strict minimum increment.

    No-op for warps that are already strictly increasing with margin.
    """
    v = np.asarray(values, dtype=float).copy()
    diffs = np.diff(v)
    if np.all(diffs >= guard):
        return v
    if (v.size - 1) * guard >= 1.0:
        raise ValueError("grid too fine for the slope guard")
    for k in range(1, v.size):
        if v[k] < v[k - 1] + guard:
            v[k] = v[k - 1] + guard
    # The forward pass may overshoot near 1; push back from the right end.
    v[-1] = 1.0
    for k in range(v.size - 2, -1, -1):
        if v[k] > v[k + 1] - guard:
            v[k] = v[k + 1] - guard
    if v[0] != 0.0:
        raise ValueError("warp cannot be repaired to fix both endpoints")
    return v


@dataclass(frozen=True)
class Warp:
    """Discretized increasing bijection of [0, 1] with fixed endpoints."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size != self.grid.size:
            raise ValueError("values must match the grid length")
        if abs(vals[0]) > 1e-9 or abs(vals[-1] - 1.0) > 1e-9:
            raise ValueError("warp endpoints must be 0 and 1")
        vals = vals.copy()
        vals[0] = 0.0
        vals[-1] = 1.0
        vals = _repair_monotone(vals, WARP_SLOPE_GUARD * self.grid.step)
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def identity(cls, grid: TimeGrid) -> "Warp":
        return cls(grid, grid.points)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the warp at arbitrary times by linear interpolation."""
        return np.interp(t, self.grid.points, self.values)

    def inverse(self) -> "Warp":
        """Inverse bijection, resampled on the same grid."""
        inv = np.interp(self.grid.points, self.values, self.grid.points)
        return Warp(self.grid, inv)

    def compose(self, inner: "Warp") -> "Warp":
        """self o inner, i.e. t -> self(inner(t))."""
        if self.grid != inner.grid:
            raise GridMismatch("warps live on different grids")
        return Warp(self.grid, self(inner.values))


def srsf_transform(f: Curve) -> Srsf:
    """q = sign(f') sqrt(|f'|) with f' from finite differences."""
    slope = _derivative(f.values, f.grid.step)
    return Srsf(f.grid, np.sign(slope) * np.sqrt(np.abs(slope)))


def srsf_inverse(q: Srsf, f0: float) -> Curve:
    """Recover the curve: f(t) = f0 + int_0^t q|q|."""
    integrand = q.values * np.abs(q.values)
    vals = f0 + cumulative_trapezoid(integrand, dx=q.grid.step, initial=0.0)
    return Curve(q.grid, vals)


def warp_curve(f: Curve, gamma: Warp) -> Curve:
    """Domain warping f o gamma via linear interpolation."""
    if f.grid != gamma.grid:
        raise GridMismatch("curve and warp live on different grids")
    return Curve(f.grid, np.interp(gamma.values, f.grid.points, f.values))


def warp_srsf(q: Srsf, gamma: Warp) -> Srsf:
    """Group action on transforms: (q o gamma) sqrt(gamma')."""
    if q.grid != gamma.grid:
        raise GridMismatch("transform and warp live on different grids")
    if np.array_equal(gamma.values, gamma.grid.points):
        return q
    slope = np.maximum(_derivative(gamma.values, gamma.grid.step), 0.0)
    warped = np.interp(gamma.values, q.grid.points, q.values)
    return Srsf(q.grid, warped * np.sqrt(slope))


def fr_distance(f: Curve, g: Curve) -> float:
    """Elastic (Fisher-Rao) distance, computed as L2 between the transforms."""
    if f.grid != g.grid:
        raise GridMismatch("curves live on different grids")
    q1 = srsf_transform(f)
    q2 = srsf_transform(g)
    return l2_distance(Curve(f.grid, q1.values), Curve(g.grid, q2.values))

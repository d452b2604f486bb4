"""Discretized functions on [0, 1], observation patterns, and plain distances.

A :class:`Curve` is a function sampled on a uniform :class:`TimeGrid`.
Partial observations are described by an observation pattern (a single
interval, disjoint fragments, or a sparse point set) and materialized as a
:class:`PartialCurve`, which keeps the retained grid indices.

All objects are immutable after construction and every operation is pure,
so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import EmptySupport, GridMismatch, SupportMismatch

_UNIFORM_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k/(T-1) on [0, 1], T >= 2."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        step = 1.0 / (pts.size - 1)
        if np.any(np.abs(np.diff(pts) - step) > _UNIFORM_TOL):
            raise ValueError("grid spacing must be uniform")

    @classmethod
    def uniform(cls, size: int) -> "TimeGrid":
        """Grid with `size` equally spaced points spanning [0, 1]."""
        if size < 2:
            raise ValueError("size must be >= 2")
        return cls(np.linspace(0.0, 1.0, size))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def step(self) -> float:
        return 1.0 / (self.points.size - 1)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.points.size == other.points.size

    def __hash__(self):
        return hash(self.points.size)

    def index_of(self, t: float) -> int:
        """Index of the grid point nearest to `t`."""
        return int(round(t * (self.size - 1)))


@dataclass(frozen=True)
class Curve:
    """A function discretized on a uniform grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size != self.grid.size:
            raise ValueError("values must match the grid length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")

    def __eq__(self, other):
        return (
            isinstance(other, Curve)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.grid, self.values.tobytes()))


@dataclass(frozen=True)
class Interval:
    """Single observed interval [u1, u2] within [0, 1]."""

    u1: float
    u2: float

    def __post_init__(self):
        if not (0.0 <= self.u1 < self.u2 <= 1.0):
            raise ValueError("require 0 <= u1 < u2 <= 1")


@dataclass(frozen=True)
class Fragments:
    """Disjoint observed intervals with mixture weights summing to one.

    Weights default to 1/J when not given.
    """

    intervals: tuple
    weights: tuple = None

    def __post_init__(self):
        ivals = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivals)
        if not ivals:
            raise ValueError("need at least one fragment")
        for a, b in ivals:
            if not (0.0 <= a < b <= 1.0):
                raise ValueError("each fragment must satisfy 0 <= a < b <= 1")
        for (_, b), (a2, _) in zip(ivals, ivals[1:]):
            if a2 < b:
                raise ValueError("fragments must be disjoint and ordered")
        if self.weights is None:
            w = tuple(1.0 / len(ivals) for _ in ivals)
        else:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(ivals):
                raise ValueError("one weight per fragment required")
            if any(x <= 0 for x in w):
                raise ValueError("weights must be positive")
            if abs(sum(w) - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class SparsePoints:
    """Observation at a finite, strictly increasing set of time points."""

    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("need at least one point")
        if any(not (0.0 <= p <= 1.0) for p in pts):
            raise ValueError("points must lie in [0, 1]")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("points must be strictly increasing")


ObservationPattern = Union[Interval, Fragments, SparsePoints]


def _interval_indices(grid: TimeGrid, u1: float, u2: float) -> np.ndarray:
    # Snap endpoints outward so no sample inside [u1, u2] is dropped.
    n = grid.size - 1
    lo = int(np.floor(u1 * n + 1e-9))
    hi = int(np.ceil(u2 * n - 1e-9))
    lo = max(lo, 0)
    hi = min(hi, n)
    if hi < lo:
        raise EmptySupport(f"interval [{u1}, {u2}] contains no grid point")
    return np.arange(lo, hi + 1)


def pattern_indices(grid: TimeGrid, pattern: ObservationPattern) -> np.ndarray:
    """Grid indices retained by `pattern`, snapped per the pattern rules."""
    if isinstance(pattern, Interval):
        return _interval_indices(grid, pattern.u1, pattern.u2)
    if isinstance(pattern, Fragments):
        parts = [_interval_indices(grid, a, b) for a, b in pattern.intervals]
        return np.unique(np.concatenate(parts))
    if isinstance(pattern, SparsePoints):
        idx = np.array(sorted({grid.index_of(p) for p in pattern.points}))
        if idx.size == 0:
            raise EmptySupport("sparse pattern contains no grid point")
        return idx
    raise TypeError(f"unknown pattern type: {type(pattern)!r}")


@dataclass(frozen=True)
class PartialCurve:
    """A curve observed only on the support of an observation pattern."""

    source: Curve
    pattern: ObservationPattern
    indices: np.ndarray = field(default=None)

    def __post_init__(self):
        idx = pattern_indices(self.source.grid, self.pattern)
        object.__setattr__(self, "indices", _frozen(idx, dtype=np.intp))

    @property
    def grid(self) -> TimeGrid:
        return self.source.grid

    @property
    def times(self) -> np.ndarray:
        return self.source.grid.points[self.indices]

    @property
    def values(self) -> np.ndarray:
        return self.source.values[self.indices]

    def fragment_slices(self) -> list:
        """Per-fragment (indices, weight) pairs; only for Fragments patterns."""
        if not isinstance(self.pattern, Fragments):
            raise SupportMismatch("fragment_slices requires a Fragments pattern")
        out = []
        for (a, b), w in zip(self.pattern.intervals, self.pattern.weights):
            out.append((_interval_indices(self.grid, a, b), w))
        return out

    def same_support(self, other: "PartialCurve") -> bool:
        return self.grid == other.grid and np.array_equal(self.indices, other.indices)


def restrict(curve, pattern: ObservationPattern) -> PartialCurve:
    """Cut a curve down to the support of `pattern`.

    Accepts a full :class:`Curve` or an already-restricted
    :class:`PartialCurve` whose support contains the new pattern (so
    restricting twice with the same pattern is a no-op).
    """
    if isinstance(curve, PartialCurve):
        inner = PartialCurve(curve.source, pattern)
        if not np.all(np.isin(inner.indices, curve.indices)):
            raise SupportMismatch("new pattern is not contained in the observed support")
        return inner
    return PartialCurve(curve, pattern)


def _common_support(f, g):
    """Validate matching supports; return (indices, grid) for the overlap."""
    if isinstance(f, Curve) and isinstance(g, Curve):
        if f.grid != g.grid:
            raise GridMismatch("curves live on different grids")
        return np.arange(f.grid.size), f.grid
    if isinstance(f, PartialCurve) and isinstance(g, PartialCurve):
        if f.grid != g.grid:
            raise GridMismatch("curves live on different grids")
        if not np.array_equal(f.indices, g.indices):
            raise SupportMismatch("partial curves observed on different supports")
        return f.indices, f.grid
    raise SupportMismatch("operands must both be full curves or share a pattern")


def _values_on(obj, indices) -> np.ndarray:
    src = obj.source.values if isinstance(obj, PartialCurve) else obj.values
    return src[indices]


def l2_distance(f, g) -> float:
    """Trapezoidal L2 distance over the common (possibly fragmented) support."""
    idx, grid = _common_support(f, g)
    diff = _values_on(f, idx) - _values_on(g, idx)
    sq = diff * diff
    h = grid.step
    # Integrate within contiguous runs only; gaps carry no measure.
    breaks = np.flatnonzero(np.diff(idx) != 1)
    total = 0.0
    start = 0
    for stop in np.append(breaks, idx.size - 1):
        seg = sq[start : stop + 1]
        if seg.size >= 2:
            total += float(np.trapezoid(seg, dx=h))
        start = stop + 1
    return float(np.sqrt(total))


def euclid_distance(x: PartialCurve, y: PartialCurve) -> float:
    """Plain Euclidean distance between sparse observation vectors."""
    if not (isinstance(x.pattern, SparsePoints) and isinstance(y.pattern, SparsePoints)):
        raise SupportMismatch("euclid_distance requires sparse patterns")
    if x.grid != y.grid or not np.array_equal(x.indices, y.indices):
        raise SupportMismatch("sparse point sets differ")
    diff = x.values - y.values
    return float(np.sqrt(np.dot(diff, diff)))


def prod_distance(x: PartialCurve, y: PartialCurve, base="l2") -> float:
    """Weighted sum of per-fragment base distances, sum_j lambda_j d(x_j, y_j)."""
    if not (isinstance(x.pattern, Fragments) and isinstance(y.pattern, Fragments)):
        raise SupportMismatch("prod_distance requires fragmented patterns")
    if x.grid != y.grid or x.pattern.intervals != y.pattern.intervals:
        raise SupportMismatch("fragment layouts differ")
    if x.pattern.weights != y.pattern.weights:
        raise SupportMismatch("fragment weights differ")
    base_fn = _fragment_base(base)
    total = 0.0
    for (idx, w) in x.fragment_slices():
        total += w * base_fn(x.source.values[idx], y.source.values[idx], x.grid.step)
    return float(total)


def _fragment_base(name):
    if callable(name):
        return name
    if name == "l2":
        def seg_l2(a, b, h):
            d = a - b
            return float(np.sqrt(np.trapezoid(d * d, dx=h)))
        return seg_l2
    if name == "euclid":
        def seg_euclid(a, b, _h):
            d = a - b
            return float(np.sqrt(np.dot(d, d)))
        return seg_euclid
    raise ValueError(f"unknown base distance {name!r}")

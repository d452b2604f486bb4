"""Neighborhood smoothing: kernels, distances between predictors, bandwidth
selection, and the presmoothers.

The smoother predicts a response as a kernel-weighted average of all other
responses, with weights driven by distances between the functional
predictors. A single symmetric distance matrix therefore serves every time
point at once.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._stats import ceil_index, sorted_sum
from .errors import DegenerateDistances, MetricPatternMismatch, SupportMismatch
from .funcore import (
    Curve,
    Fragments,
    Interval,
    PartialCurve,
    SparsePoints,
    TimeGrid,
    euclid_distance,
    l2_distance,
    prod_distance,
)
from .registration import register_batch
from .srsf import srsf_transform

KERNEL_KINDS = ("gaussian", "triangular")
METRICS = ("l2", "fr", "amplitude", "euclid", "prod")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth for neighborhood smoothing."""

    kind: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")
        if not (self.bandwidth > 0):
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class BandwidthTuning:
    """Request to select the bandwidth by minimizing band length.

    Candidates come either from `candidates` directly or from distance
    quantiles at the given `betas`. Mode 'global' picks one bandwidth for
    all time points; 'local' picks one per time point.
    """

    mode: str = "local"
    kind: str = "gaussian"
    betas: tuple = tuple(np.round(np.arange(0.1, 0.95, 0.1), 10))
    candidates: tuple = None

    def __post_init__(self):
        if self.mode not in ("global", "local"):
            raise ValueError("mode must be 'global' or 'local'")
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distances with an exactly zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float).copy()
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("entries must be square")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("entries must be finite and nonnegative")
        if np.any(np.diag(arr) != 0.0):
            raise ValueError("diagonal must be exactly zero")
        if not np.array_equal(arr, arr.T):
            raise ValueError("entries must be exactly symmetric")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def upper_triangle(self) -> np.ndarray:
        iu = np.triu_indices(self.n, k=1)
        return self.entries[iu]


def _rescaled_curves(predictors: Sequence[PartialCurve]) -> list:
    """Map each partial's observed values onto a fresh unit-domain grid.

    Registration-based distances need the unit domain; the common support is
    stretched affinely and the change of variable is the same for every
    predictor, so relative comparisons are unaffected.
    """
    m = predictors[0].indices.size
    if m < 2:
        raise MetricPatternMismatch("need at least two observed points")
    grid = TimeGrid.uniform(m)
    return [Curve(grid, p.values) for p in predictors]


def _check_common(predictors: Sequence[PartialCurve]):
    first = predictors[0]
    for p in predictors[1:]:
        if not first.same_support(p):
            raise SupportMismatch("predictors must share pattern and grid")


def distance_matrix(predictors: Sequence[PartialCurve], metric: str = "l2") -> DistanceMatrix:
    """Pairwise distances between predictors under the chosen metric.

    Interval patterns admit 'l2', 'fr' and 'amplitude'; fragmented patterns
    admit 'l2' and 'prod'; sparse patterns admit 'euclid' only.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if not predictors:
        raise ValueError("need at least one predictor")
    _check_common(predictors)
    pattern = predictors[0].pattern
    n = len(predictors)
    out = np.zeros((n, n))

    if isinstance(pattern, SparsePoints):
        if metric != "euclid":
            raise MetricPatternMismatch(f"metric {metric!r} undefined on sparse patterns")
        fill = lambda i, j: euclid_distance(predictors[i], predictors[j])
    elif isinstance(pattern, Fragments):
        if metric == "prod":
            fill = lambda i, j: prod_distance(predictors[i], predictors[j])
        elif metric == "l2":
            fill = lambda i, j: l2_distance(predictors[i], predictors[j])
        else:
            raise MetricPatternMismatch(f"metric {metric!r} undefined on fragmented patterns")
    else:
        if metric == "l2":
            fill = lambda i, j: l2_distance(predictors[i], predictors[j])
        elif metric in ("fr", "amplitude"):
            return _elastic_matrix(predictors, metric)
        else:
            raise MetricPatternMismatch(f"metric {metric!r} undefined on interval patterns")

    for i in range(n):
        for j in range(i + 1, n):
            d = fill(i, j)
            out[i, j] = d
            out[j, i] = d
    return DistanceMatrix(out)


def _elastic_matrix(predictors: Sequence[PartialCurve], metric: str) -> DistanceMatrix:
    curves = _rescaled_curves(predictors)
    qs = [srsf_transform(c) for c in curves]
    n = len(qs)
    h = curves[0].grid.step
    out = np.zeros((n, n))
    if metric == "fr":
        stack = np.array([q.values for q in qs])
        for i in range(n):
            diff = stack[i + 1 :] - stack[i]
            if diff.size:
                d = np.sqrt(np.trapezoid(diff * diff, dx=h, axis=1))
                out[i, i + 1 :] = d
                out[i + 1 :, i] = d
    else:
        for i in range(n - 1):
            _, dists = register_batch(qs[i], qs[i + 1 :])
            out[i, i + 1 :] = dists
            out[i + 1 :, i] = dists
    return DistanceMatrix(out)


def _stabilized_weights(u: np.ndarray, kind: str, offdiag: np.ndarray) -> np.ndarray:
    """Kernel weights for scaled distances u, zeroed on the diagonal.

    Gaussian weights are rescaled by the per-row maximum (equivalent after
    normalization) so that tiny bandwidths degrade to nearest-neighbor
    prediction instead of underflowing to 0/0.
    """
    if kind == "gaussian":
        sq = 0.5 * u * u
        row_min = np.min(np.where(offdiag, sq, np.inf), axis=-1, keepdims=True)
        w = np.exp(-(sq - row_min))
    else:
        w = np.maximum(1.0 - u, 0.0)
    return np.where(offdiag, w, 0.0)


def weight_matrix(distances: np.ndarray, kernel: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Smoothing weights for a full distance matrix.

    Returns the zero-diagonal weight matrix and a boolean mask of rows that
    fell back to uniform weights because every kernel weight vanished.
    """
    d = np.asarray(distances, dtype=float)
    n = d.shape[0]
    offdiag = ~np.eye(n, dtype=bool)
    w = _stabilized_weights(d / kernel.bandwidth, kernel.kind, offdiag)
    fallback = w.sum(axis=1) == 0.0
    if np.any(fallback):
        w[fallback] = np.where(offdiag[fallback], 1.0, 0.0)
    return w, fallback


def ns_predict(D_row, responses, self_index: int, kernel: KernelSpec) -> float:
    """Kernel-weighted average of the other responses.

    Weights are K(d/h) for the distances from point `self_index` to every
    other point; the prediction is their normalized dot product with the
    responses. If every weight vanishes (possible for the triangular
    kernel) the unweighted mean of the others is returned and a warning is
    emitted.
    """
    d = np.asarray(D_row, dtype=float)
    y = np.asarray(responses, dtype=float)
    if d.shape != y.shape or d.ndim != 1:
        raise ValueError("D_row and responses must be 1-d and equally long")
    if not (0 <= self_index < d.size):
        raise ValueError("self_index out of range")
    mask = np.ones(d.size, dtype=bool)
    mask[self_index] = False
    w = _stabilized_weights(d / kernel.bandwidth, kernel.kind, mask)
    if w.sum() == 0.0:
        warnings.warn("all kernel weights vanished; using the unweighted mean", RuntimeWarning)
        w = mask.astype(float)
    return float(sorted_sum(w * y) / sorted_sum(w))


def bandwidth_candidates(D: DistanceMatrix, betas) -> list:
    """Lower-beta quantiles of the off-diagonal distances, one per beta.

    Zero candidates are replaced by the smallest positive distance so that
    every candidate is usable as a bandwidth.
    """
    if D.n < 2:
        raise ValueError("need at least two points")
    vals = np.sort(D.upper_triangle())
    positive = vals[vals > 0]
    if positive.size == 0:
        raise DegenerateDistances("all pairwise distances are zero")
    out = []
    m = vals.size
    for beta in betas:
        if not (0.0 < beta < 1.0):
            raise ValueError("each beta must be in (0, 1)")
        cand = float(vals[ceil_index(beta, m) - 1])
        if cand == 0.0:
            cand = float(positive[0])
        out.append(cand)
    return out


@dataclass(frozen=True)
class BandwidthSelection:
    """Outcome of bandwidth tuning: chosen bandwidth(s) and the final band."""

    mode: str
    bandwidth: object  # float for global mode, per-point array for local
    band: object


def _point_lengths(band) -> np.ndarray:
    length = band.upper - band.lower
    length = np.where(np.isfinite(length), length, np.inf)
    return length


def tune_bandwidth(run: Callable, H, mode: str) -> BandwidthSelection:
    """Select bandwidth(s) by minimizing prediction-band length.

    `run` maps a bandwidth to a prediction band. Global mode minimizes the
    time-averaged length; local mode minimizes per time point and stitches
    the winning intervals together. Ties go to the smaller bandwidth, and
    points with no accepted trial value count as infinitely long.
    """
    if mode not in ("global", "local"):
        raise ValueError("mode must be 'global' or 'local'")
    H = sorted(float(h) for h in H)
    if not H:
        raise ValueError("H must be nonempty")
    bands = [run(h) for h in H]
    lengths = np.array([_point_lengths(b) for b in bands])  # (n_h, T)

    if mode == "global":
        means = lengths.mean(axis=1)
        best = int(np.argmin(means))  # argmin takes the first, i.e. smallest h
        return BandwidthSelection("global", H[best], bands[best])

    choice = np.argmin(lengths, axis=0)  # first minimum -> smallest h
    ref = bands[0]
    lower = np.array([bands[c].lower[k] for k, c in enumerate(choice)])
    upper = np.array([bands[c].upper[k] for k, c in enumerate(choice)])
    empty = sorted({k for k, c in enumerate(choice) if k in set(bands[c].empty_points)})
    nonconvex = sorted({k for k, c in enumerate(choice) if k in set(bands[c].nonconvex_points)})
    picked = np.array([H[c] for c in choice])
    band = ref.replace(
        lower=lower,
        upper=upper,
        empty_points=tuple(empty),
        nonconvex_points=tuple(nonconvex),
        bandwidth=picked,
    )
    return BandwidthSelection("local", picked, band)


def _fourier_design(t: np.ndarray, n_basis: int) -> np.ndarray:
    cols = [np.ones_like(t)]
    k = 1
    while len(cols) < n_basis:
        cols.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * t))
        if len(cols) < n_basis:
            cols.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * t))
        k += 1
    return np.column_stack(cols)


def _trapezoid_weights(size: int, step: float) -> np.ndarray:
    w = np.full(size, step)
    w[0] = w[-1] = 0.5 * step
    return w


def fourier_project(f: Curve, n_basis: int = 10) -> Curve:
    """L2 projection onto the first `n_basis` Fourier basis functions.

    The basis runs constant, sin, cos, sin, cos, ... so ten functions mean
    the constant, four sine/cosine pairs, and one extra sine.
    """
    if n_basis < 1:
        raise ValueError("n_basis must be >= 1")
    t = f.grid.points
    phi = _fourier_design(t, n_basis)
    w = _trapezoid_weights(t.size, f.grid.step)
    gram = phi.T @ (w[:, None] * phi)
    rhs = phi.T @ (w * f.values)
    coef = np.linalg.solve(gram, rhs)
    return Curve(f.grid, phi @ coef)


def moving_average(f: Curve, window: int = 12) -> Curve:
    """Centered moving average with the window shrunk near the boundaries.

    Uses the symmetric half-width window // 2, so an even `window` acts as
    the next odd size; window = 1 is the identity.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    half = window // 2
    if half == 0:
        return f
    T = f.grid.size
    csum = np.concatenate([[0.0], np.cumsum(f.values)])
    out = np.empty(T)
    for k in range(T):
        lo = max(0, k - half)
        hi = min(T - 1, k + half)
        out[k] = (csum[hi + 1] - csum[lo]) / (hi - lo + 1)
    return Curve(f.grid, out)

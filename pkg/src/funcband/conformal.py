"""Conformal prediction bands for partially observed functions.

Three procedures share one accept/reject engine:

* ``ffcp`` - full conformal on the raw values: at every grid time, each
  trial value for the new response is accepted when its absolute residual
  under leave-self-out neighborhood smoothing falls within the 1-alpha
  quantile of all residuals.
* ``sfcp`` - the split variant: a training split estimates an elastic
  template, calibration curves are registered to it, and the engine then
  targets the registered (amplitude) values.
* ``sfcpp`` - joint prediction of the relative-phase warp on a coarse grid,
  with monotone trial vectors scored by the warp-sphere distance at level
  1 - alpha/(T-2).

Everything downstream of the distance matrix is deterministic, and all
reductions canonicalize addend order, so permuting the calibration set
never moves a band endpoint.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ._stats import ceil_index, lower_quantile, sorted_sum
from .errors import EmptyWarpSet, GridMismatch
from .funcore import Curve, PartialCurve, TimeGrid, restrict
from .registration import RegistrationResult, _sphere_inner, karcher_mean, register_batch
from .smoothing import (
    BandwidthTuning,
    KernelSpec,
    bandwidth_candidates,
    distance_matrix,
    tune_bandwidth,
    weight_matrix,
)
from .srsf import Warp, srsf_transform, warp_curve

__all__ = [
    "ConformalConfig",
    "TrialGridSpec",
    "PredictionBand",
    "WarpPredictionSet",
    "lower_quantile",
    "trial_grid",
    "ffcp",
    "sfcp",
    "sfcp_from_split",
    "sfcpp",
    "sfcpp_from_split",
]

RANGE_FLOOR = 1e-6


@dataclass(frozen=True)
class TrialGridSpec:
    """Trial values: equally spaced across the response range, expanded by
    `expansion` times the range on both sides."""

    n_trial: int = 200
    expansion: float = 0.25

    def __post_init__(self):
        if self.n_trial < 2:
            raise ValueError("n_trial must be >= 2")
        if self.expansion < 0:
            raise ValueError("expansion must be nonnegative")


@dataclass(frozen=True)
class ConformalConfig:
    """Knobs shared by the conformal procedures.

    `n1` is the training-split size and only matters for the split
    procedures; `seed` drives the training/calibration shuffle. `kernel`
    is either a fixed KernelSpec or a BandwidthTuning request.
    """

    alpha: float = 0.1
    n1: int = None
    metric: str = "l2"
    kernel: Union[KernelSpec, BandwidthTuning] = BandwidthTuning()
    trial_spec: TrialGridSpec = TrialGridSpec()
    seed: int = 0
    karcher_tol: float = 1e-4
    karcher_max_iter: int = 20

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class PredictionBand:
    """Per-time-point prediction intervals at a common level.

    `target` records what the intervals speak about: the raw function
    value, its registered amplitude, or a warp envelope. Points where no
    trial value was accepted are listed in `empty_points` and carry NaN
    endpoints; points whose accepted set was non-contiguous on the trial
    grid are listed in `nonconvex_points` (the interval hull is reported).
    """

    grid: TimeGrid
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    target: str
    empty_points: tuple = ()
    nonconvex_points: tuple = ()
    bandwidth: object = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (self.grid.size,) or hi.shape != (self.grid.size,):
            raise ValueError("lower/upper must match the grid length")
        if self.target not in ("raw", "amplitude", "warp_envelope"):
            raise ValueError("unknown band target")
        ok = np.ones(self.grid.size, dtype=bool)
        ok[list(self.empty_points)] = False
        if np.any(lo[ok] > hi[ok]):
            raise ValueError("lower must not exceed upper at non-empty points")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "empty_points", tuple(int(k) for k in self.empty_points))
        object.__setattr__(self, "nonconvex_points", tuple(int(k) for k in self.nonconvex_points))

    def replace(self, **kw) -> "PredictionBand":
        return dataclasses.replace(self, **kw)

    @property
    def point_prediction(self) -> np.ndarray:
        """Interval midpoints (NaN at empty points)."""
        return 0.5 * (self.lower + self.upper)

    def lengths(self) -> np.ndarray:
        """Interval lengths; an empty prediction set has length zero."""
        out = self.upper - self.lower
        return np.where(np.isfinite(out), out, 0.0)

    def covers(self, values) -> np.ndarray:
        """Pointwise containment of `values`; empty points never cover."""
        v = np.asarray(values, dtype=float)
        with np.errstate(invalid="ignore"):
            return (self.lower <= v) & (v <= self.upper)


@dataclass(frozen=True)
class WarpPredictionSet:
    """Joint prediction set for the relative phase on a coarse grid."""

    center: Warp
    radius: float
    accepted: tuple
    envelope: PredictionBand

    def __post_init__(self):
        if self.envelope.target != "warp_envelope":
            raise ValueError("envelope must target warp_envelope")


def trial_grid(responses_at_t, spec: TrialGridSpec) -> np.ndarray:
    """Equally spaced trial values spanning the expanded response range."""
    y = np.asarray(responses_at_t, dtype=float)
    if y.size == 0:
        raise ValueError("responses must be nonempty")
    lo = float(y.min())
    hi = float(y.max())
    rng = max(hi - lo, RANGE_FLOOR)
    c = spec.expansion
    return np.linspace(lo - c * rng, hi + c * rng, spec.n_trial)


# ---------------------------------------------------------------------------
# Shared accept/reject engine
# ---------------------------------------------------------------------------


class _SmootherState:
    """Distance-derived quantities reused across time points and trials."""

    def __init__(self, D_entries: np.ndarray, kernel: KernelSpec):
        self.W, self.fallback_rows = weight_matrix(D_entries, kernel)
        # Row sums include the new point's column; the diagonal zero is a
        # constant member of every multiset, so sorted sums stay
        # permutation-invariant.
        self.w_sum = sorted_sum(self.W, axis=1)
        n = self.W.shape[0] - 1
        self.w_new = self.W[:n, n]
        self.n = n

    def base_fit(self, y_cal: np.ndarray) -> np.ndarray:
        """sum over calibration points of w_ij * y_j for every row."""
        terms = self.W[:, : self.n] * y_cal[None, :]
        return sorted_sum(terms, axis=1)


def _accept_mask(state: _SmootherState, y_cal, ys, level) -> tuple[np.ndarray, np.ndarray]:
    """Acceptance of each trial value, plus the y-free new-point fit."""
    n = state.n
    A = state.base_fit(y_cal)
    yhat_new = A[n] / state.w_sum[n]
    fits = (A[:n, None] + state.w_new[:, None] * ys[None, :]) / state.w_sum[:n, None]
    s_cal = np.abs(y_cal[:, None] - fits)  # (n, m)
    s_new = np.abs(ys - yhat_new)  # (m,)
    scores = np.vstack([s_cal, s_new[None, :]])
    k = ceil_index(level, n + 1)
    thresh = np.partition(scores, k - 1, axis=0)[k - 1]
    return s_new <= thresh, yhat_new


def _band_from_acceptance(
    state: _SmootherState,
    responses: np.ndarray,
    grid: TimeGrid,
    trial_spec: TrialGridSpec,
    alpha: float,
    target: str,
    bandwidth: float,
) -> PredictionBand:
    """Run the trial loop at every grid point and hull the accepted values."""
    T = grid.size
    lower = np.full(T, np.nan)
    upper = np.full(T, np.nan)
    empty = []
    nonconvex = []
    for k in range(T):
        y_cal = responses[:, k]
        ys = trial_grid(y_cal, trial_spec)
        accept, _ = _accept_mask(state, y_cal, ys, 1.0 - alpha)
        idx = np.flatnonzero(accept)
        if idx.size == 0:
            empty.append(k)
            continue
        lower[k] = ys[idx[0]]
        upper[k] = ys[idx[-1]]
        if idx.size > 1 and not np.all(np.diff(idx) == 1):
            nonconvex.append(k)
    return PredictionBand(
        grid=grid,
        lower=lower,
        upper=upper,
        alpha=alpha,
        target=target,
        empty_points=tuple(empty),
        nonconvex_points=tuple(nonconvex),
        bandwidth=bandwidth,
    )


def _resolve_band(D, responses, grid, config, target) -> PredictionBand:
    """Dispatch between a fixed kernel and bandwidth tuning."""
    kern = config.kernel
    if isinstance(kern, KernelSpec):
        state = _SmootherState(D.entries, kern)
        return _band_from_acceptance(
            state, responses, grid, config.trial_spec, config.alpha, target, kern.bandwidth
        )

    H = kern.candidates if kern.candidates else bandwidth_candidates(D, kern.betas)

    def run(h):
        state = _SmootherState(D.entries, KernelSpec(kern.kind, h))
        return _band_from_acceptance(
            state, responses, grid, config.trial_spec, config.alpha, target, h
        )

    return tune_bandwidth(run, H, kern.mode).band


def _check_inputs(curves: Sequence[Curve], new_partial: PartialCurve):
    for f in curves:
        if f.grid != new_partial.grid:
            raise GridMismatch("curves and the partial observation share one grid")


# ---------------------------------------------------------------------------
# FFCP
# ---------------------------------------------------------------------------


def ffcp(curves: Sequence[Curve], new_partial: PartialCurve, config: ConformalConfig) -> PredictionBand:
    """Full conformal band for the raw values of the new function.

    The complete curves provide both the truncated predictors (cut to the
    new observation's pattern) and the responses at every grid time.
    Validity rests on the truncation point being independent of the
    functions themselves.
    """
    _check_inputs(curves, new_partial)
    predictors = [restrict(f, new_partial.pattern) for f in curves] + [new_partial]
    D = distance_matrix(predictors, config.metric)
    responses = np.array([f.values for f in curves])
    return _resolve_band(D, responses, new_partial.grid, config, "raw")


# ---------------------------------------------------------------------------
# SFCP
# ---------------------------------------------------------------------------


def _split(curves: Sequence[Curve], config: ConformalConfig) -> tuple[list, list]:
    n = len(curves)
    n1 = config.n1
    if n1 is None or not (0 < n1 < n):
        raise ValueError("split procedures need 0 < n1 < n")
    perm = np.random.default_rng(config.seed).permutation(n)
    training = [curves[i] for i in perm[:n1]]
    calibration = [curves[i] for i in perm[n1:]]
    return training, calibration


def _register_to_template(reg: RegistrationResult, curves: Sequence[Curve]) -> tuple[list, list]:
    """Relative phases and amplitudes of `curves` against a fixed template."""
    warps, _ = register_batch(reg.template_srsf, [srsf_transform(f) for f in curves])
    aligned = [warp_curve(f, g) for f, g in zip(curves, warps)]
    return warps, aligned


def sfcp_from_split(
    training: Sequence[Curve],
    calibration: Sequence[Curve],
    new_partial: PartialCurve,
    config: ConformalConfig,
) -> tuple[PredictionBand, RegistrationResult]:
    """SFCP with an explicit training/calibration split (no shuffling)."""
    _check_inputs(list(training) + list(calibration), new_partial)
    reg = karcher_mean(training, tol=config.karcher_tol, max_iter=config.karcher_max_iter)
    _, amplitudes = _register_to_template(reg, calibration)
    responses = np.array([f.values for f in amplitudes])
    predictors = [restrict(f, new_partial.pattern) for f in calibration] + [new_partial]
    D = distance_matrix(predictors, config.metric)
    band = _resolve_band(D, responses, new_partial.grid, config, "amplitude")
    return band, reg


def sfcp(
    curves: Sequence[Curve], new_partial: PartialCurve, config: ConformalConfig
) -> tuple[PredictionBand, RegistrationResult]:
    """Split conformal band for the amplitude of the new function.

    The first `n1` curves after a seeded shuffle estimate the elastic
    template; the rest are registered to it and calibrate the band. The
    predictors stay unregistered, so the band targets the amplitude
    coordinate system defined by the training template.
    """
    training, calibration = _split(curves, config)
    return sfcp_from_split(training, calibration, new_partial, config)


# ---------------------------------------------------------------------------
# SFCPP
# ---------------------------------------------------------------------------


def _warp_scores(y_rows: np.ndarray, fits: np.ndarray) -> np.ndarray:
    """Warp-sphere distance between matching rows of two stacks."""
    d1 = np.maximum(np.diff(y_rows, axis=-1), 0.0)
    d2 = np.maximum(np.diff(fits, axis=-1), 0.0)
    inner = np.clip(np.sum(np.sqrt(d1 * d2), axis=-1), -1.0, 1.0)
    return np.arccos(inner)


# Resolution of the uniform component of the warp trial lattice.
_LATTICE_GRID = 15


def _trial_vectors(cal_warp_values: np.ndarray, spec: TrialGridSpec) -> np.ndarray:
    """Monotone trial vectors on the coarse grid.

    Per free coordinate the candidates combine the deciles of the
    calibration warps, their range endpoints expanded by the trial
    expansion factor, and a fixed uniform grid over (0, 1) so the lattice
    reaches wherever the acceptance region may extend. The Cartesian
    product is filtered to strictly increasing interior vectors.
    """
    n2, Tc = cal_warp_values.shape
    uniform = np.linspace(0.0, 1.0, _LATTICE_GRID + 2)[1:-1]
    per_coord = []
    deciles = np.round(np.arange(0.1, 0.95, 0.1), 10)
    for j in range(1, Tc - 1):
        col = cal_warp_values[:, j]
        qs = [lower_quantile(col, b) for b in deciles]
        rng = max(float(col.max() - col.min()), RANGE_FLOOR)
        lo = float(col.min()) - spec.expansion * rng
        hi = float(col.max()) + spec.expansion * rng
        cand = sorted(set(qs + [lo, hi]) | set(uniform))
        cand = [c for c in cand if 0.0 < c < 1.0]
        per_coord.append(cand)
    rows = []
    for combo in itertools.product(*per_coord):
        if all(b > a for a, b in zip(combo, combo[1:])):
            rows.append((0.0,) + combo + (1.0,))
    return np.array(rows)


class _PhaseEngine:
    """Joint accept/reject machinery for warp vectors on the coarse grid."""

    def __init__(self, state: _SmootherState, cal_warp_values: np.ndarray, alpha: float, Tc: int):
        if Tc < 3:
            raise ValueError("coarse grid needs at least 3 points")
        self.level = 1.0 - alpha / (Tc - 2)
        if self.level <= 0.0:
            raise ValueError("alpha/(T-2) must be below 1")
        self.state = state
        self.Y = cal_warp_values  # (n2, Tc)
        n = state.n
        self.A = np.column_stack([state.base_fit(self.Y[:, j]) for j in range(Tc)])  # (n+1, Tc)
        self.center = self.A[n] / state.w_sum[n]
        self.k = ceil_index(self.level, n + 1)

    def scores(self, trial: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Calibration and new-point scores for a stack of trial vectors."""
        n = self.state.n
        fits = (
            self.A[None, :n, :]
            + self.state.w_new[None, :, None] * trial[:, None, :]
        ) / self.state.w_sum[None, :n, None]
        s_cal = _warp_scores(self.Y[None, :, :], fits)  # (M, n2)
        s_new = _warp_scores(trial, self.center[None, :])  # (M,)
        return s_cal, s_new

    def accepts(self, trial: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s_cal, s_new = self.scores(trial)
        scores = np.concatenate([s_cal, s_new[:, None]], axis=1)  # (M, n2+1)
        thresh = np.partition(scores, self.k - 1, axis=1)[:, self.k - 1]
        return s_new <= thresh, s_new

    def contains(self, vector: np.ndarray) -> bool:
        """Membership of one warp vector in the conformal set."""
        accept, _ = self.accepts(vector[None, :])
        return bool(accept[0])


def _sfcpp_engine(
    training: Sequence[Curve],
    calibration: Sequence[Curve],
    new_partial: PartialCurve,
    coarse_grid: TimeGrid,
    config: ConformalConfig,
) -> tuple[WarpPredictionSet, _PhaseEngine, RegistrationResult]:
    _check_inputs(list(training) + list(calibration), new_partial)
    reg = karcher_mean(training, tol=config.karcher_tol, max_iter=config.karcher_max_iter)
    warps, _ = _register_to_template(reg, calibration)
    Yw = np.array([g(coarse_grid.points) for g in warps])
    Yw[:, 0] = 0.0
    Yw[:, -1] = 1.0
    predictors = [restrict(f, new_partial.pattern) for f in calibration] + [new_partial]
    D = distance_matrix(predictors, config.metric)

    kern = config.kernel
    if isinstance(kern, KernelSpec):
        candidates = [kern.bandwidth]
        kind = kern.kind
    else:
        # Joint prediction has a single length objective, so tuning is
        # always global here even if the config asks for local tuning.
        candidates = kern.candidates if kern.candidates else bandwidth_candidates(D, kern.betas)
        kind = kern.kind

    trial = None
    best = None  # (mean envelope length, h, engine, accept mask, s_new)
    for h in sorted(candidates):
        state = _SmootherState(D.entries, KernelSpec(kind, h))
        engine = _PhaseEngine(state, Yw, config.alpha, coarse_grid.size)
        if trial is None:
            trial = _trial_vectors(Yw, config.trial_spec)
        accept, s_new = engine.accepts(trial)
        if not accept.any():
            continue
        env_len = float(
            np.mean(trial[accept].max(axis=0) - trial[accept].min(axis=0))
        )
        if best is None or env_len < best[0]:
            best = (env_len, h, engine, accept, s_new)

    if best is None:
        raise EmptyWarpSet("no trial warp vector was accepted at any candidate bandwidth")

    _, h, engine, accept, s_new = best
    accepted_vals = trial[accept]
    lower = accepted_vals.min(axis=0)
    upper = accepted_vals.max(axis=0)
    envelope = PredictionBand(
        grid=coarse_grid,
        lower=lower,
        upper=upper,
        alpha=config.alpha,
        target="warp_envelope",
        bandwidth=h,
    )
    center = Warp(coarse_grid, engine.center)
    radius = float(np.max(s_new[accept]))
    accepted = tuple(Warp(coarse_grid, v) for v in accepted_vals)
    pred_set = WarpPredictionSet(center=center, radius=radius, accepted=accepted, envelope=envelope)
    return pred_set, engine, reg


def sfcpp_from_split(
    training: Sequence[Curve],
    calibration: Sequence[Curve],
    new_partial: PartialCurve,
    coarse_grid: TimeGrid,
    config: ConformalConfig,
) -> WarpPredictionSet:
    """SFCPP with an explicit training/calibration split (no shuffling)."""
    pred_set, _, _ = _sfcpp_engine(training, calibration, new_partial, coarse_grid, config)
    return pred_set


def sfcpp(
    curves: Sequence[Curve],
    new_partial: PartialCurve,
    coarse_grid: TimeGrid,
    config: ConformalConfig,
) -> WarpPredictionSet:
    """Joint conformal prediction set for the new function's relative phase.

    Responses are the calibration warps sampled on the coarse grid, scored
    by the warp-sphere distance against their leave-self-out smoothed
    fits; the acceptance level is lifted to 1 - alpha/(T-2) because the
    two endpoint coordinates are fixed at 0 and 1.
    """
    training, calibration = _split(curves, config)
    return sfcpp_from_split(training, calibration, new_partial, coarse_grid, config)

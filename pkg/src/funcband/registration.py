"""Pairwise and groupwise elastic registration.

Pairwise alignment solves the warp optimization on a dense lattice by
dynamic programming (see :mod:`funcband._dp`). Groupwise alignment iterates
template estimation: align every transform to the current template, average
the aligned transforms, repeat until the summed squared alignment cost
stabilizes. The align step over curves is embarrassingly parallel and runs
through a threaded batch kernel; the template update is a serial reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dp
from .errors import GridMismatch
from .funcore import Curve, TimeGrid
from .srsf import Srsf, Warp, srsf_inverse, srsf_transform, warp_curve, warp_srsf


@dataclass(frozen=True)
class RegistrationResult:
    """Output of groupwise registration against an estimated template."""

    template: Curve
    template_srsf: Srsf
    warps: tuple
    aligned: tuple
    objective_trace: np.ndarray
    converged: bool
    n_iter: int


def _check_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch("operands live on different grids")


def pairwise_register(q1: Srsf, q2: Srsf) -> tuple[Warp, float]:
    """Warp aligning q2 to q1 and the achieved (amplitude) distance.

    The warp is the best piecewise-linear path on the grid lattice; its
    cost never exceeds the plain L2 distance because the identity path is
    always available.
    """
    _check_grid(q1, q2)
    gamma_vals, sq_cost = _dp.dp_register(q1.values, q2.values, q1.grid.points, _dp.MOVES)
    return Warp(q1.grid, gamma_vals), float(np.sqrt(max(sq_cost, 0.0)))


def register_batch(q1: Srsf, qs: list) -> tuple[list, np.ndarray]:
    """Register many transforms to one template; parallel across inputs."""
    for q in qs:
        _check_grid(q1, q)
    stack = np.ascontiguousarray([q.values for q in qs])
    gammas, sq_costs = _dp.dp_register_batch(q1.values, stack, q1.grid.points, _dp.MOVES)
    warps = [Warp(q1.grid, gammas[r]) for r in range(len(qs))]
    return warps, np.sqrt(np.maximum(sq_costs, 0.0))


def amplitude_distance(f: Curve, g: Curve) -> float:
    """Registered (phase-removed) distance between two curves."""
    _check_grid(f, g)
    return pairwise_register(srsf_transform(f), srsf_transform(g))[1]


def multiple_register(curves: list, template: Curve) -> tuple[list, list]:
    """Align every curve to a fixed template; returns (warps, aligned curves)."""
    q_t = srsf_transform(template)
    warps, _ = register_batch(q_t, [srsf_transform(f) for f in curves])
    aligned = [warp_curve(f, g) for f, g in zip(curves, warps)]
    return warps, aligned


def _l2_arrays(a: np.ndarray, b: np.ndarray, h: float) -> float:
    d = a - b
    return float(np.sqrt(np.trapezoid(d * d, dx=h)))


def _mean_warp(warps: list, grid: TimeGrid) -> Warp:
    vals = np.mean([g.values for g in warps], axis=0)
    vals[0] = 0.0
    vals[-1] = 1.0
    return Warp(grid, vals)


def karcher_mean(
    curves: list,
    tol: float = 1e-4,
    max_iter: int = 20,
    recenter_warps: bool = False,
) -> RegistrationResult:
    """Estimate the elastic template of a sample of curves.

    Starts from the input curve whose transform is closest to the pointwise
    transform average, then alternates batch alignment with averaging of the
    aligned transforms. Stops when the relative drop of the summed squared
    alignment cost falls below `tol`; if `max_iter` is exhausted first, the
    best iterate is returned with ``converged=False``. The recorded
    objective trace is nonincreasing: an iterate that fails to improve is
    discarded and iteration stops there.

    With ``recenter_warps`` the template is additionally pulled back by the
    inverse mean warp after each update; off by default so that a template
    fit on a training split stays reproducible from that split alone.
    """
    if not curves:
        raise ValueError("need at least one curve")
    grid = curves[0].grid
    for f in curves[1:]:
        _check_grid(curves[0], f)
    h = grid.step
    qs = [srsf_transform(f) for f in curves]
    q_stack = np.array([q.values for q in qs])

    q_avg = q_stack.mean(axis=0)
    init_idx = int(np.argmin([_l2_arrays(row, q_avg, h) for row in q_stack]))
    template_q = qs[init_idx]

    trace = []
    best = None  # (objective, template_q, warps, costs)
    converged = False
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        warps, costs = register_batch(template_q, qs)
        objective = float(np.sum(costs * costs))
        if best is not None and objective > best[0]:
            break  # keep the previous, better iterate
        trace.append(objective)
        improved_enough = best is not None and (
            best[0] - objective <= tol * max(best[0], 1e-300)
        )
        best = (objective, template_q, warps, costs)
        if improved_enough:
            converged = True
            break
        aligned_q = np.array([warp_srsf(q, g).values for q, g in zip(qs, warps)])
        new_q = aligned_q.mean(axis=0)
        template_q = Srsf(grid, new_q)
        if recenter_warps:
            inv_mean = _mean_warp(warps, grid).inverse()
            template_q = warp_srsf(template_q, inv_mean)

    _, template_q, warps, _ = best
    f0 = float(np.mean([f.values[0] for f in curves]))
    template = srsf_inverse(template_q, f0)
    aligned = tuple(warp_curve(f, g) for f, g in zip(curves, warps))
    return RegistrationResult(
        template=template,
        template_srsf=template_q,
        warps=tuple(warps),
        aligned=aligned,
        objective_trace=np.asarray(trace),
        converged=converged,
        n_iter=n_iter,
    )


def _sphere_inner(v1: np.ndarray, v2: np.ndarray) -> float:
    """Inner product of the slope-root representations of two warp vectors.

    Warps are piecewise linear between samples, so their slope roots are
    piecewise constant and the integral reduces to a sum over cells; the
    cell widths cancel. The result never exceeds 1 (Cauchy-Schwarz) up to
    rounding.
    """
    d1 = np.maximum(np.diff(v1), 0.0)
    d2 = np.maximum(np.diff(v2), 0.0)
    return float(np.sum(np.sqrt(d1 * d2)))


def warp_distance(gamma1: Warp, gamma2: Warp) -> float:
    """Arc length between warps on the sphere of slope-root representations."""
    _check_grid(gamma1, gamma2)
    inner = np.clip(_sphere_inner(gamma1.values, gamma2.values), -1.0, 1.0)
    return float(np.arccos(inner))

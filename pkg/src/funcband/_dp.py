"""Dynamic-programming lattice solver for elastic registration.

The solver finds a piecewise-linear warp through the T x T grid minimizing
the squared L2 mismatch between a fixed transform q1 and the warped
transform of q2. Lattice moves are the primitive integer steps (a, b) with
1 <= a, b <= MAX_STEP and gcd(a, b) = 1; non-primitive steps are redundant
because the edge integrand is additive across interior nodes.

Edge costs integrate the exact piecewise-linear-warp integrand with the
trapezoid rule on max(a, b) subintervals, so the cost of the identity path
coincides with the trapezoidal L2 distance between q1 and q2. Ties are
broken toward the earliest move in MOVES, which lists (1, 1) first; this
keeps self-registration exactly on the diagonal and makes results
reproducible under any thread count.

Sample positions along each edge are precomputed once as (index, weight)
interpolation tables shared by the production kernel and any reference
implementation, so both evaluate bit-identical edge costs.
"""

from __future__ import annotations

from math import gcd

import numpy as np
from numba import njit, prange

MAX_STEP = 6
MOVES = np.array(
    [(a, b) for a in range(1, MAX_STEP + 1) for b in range(1, MAX_STEP + 1) if gcd(a, b) == 1],
    dtype=np.int64,
)


def _build_tables(moves: np.ndarray):
    """Interpolation tables for the trapezoid samples of every move.

    For move (a, b) the edge is sampled at s = 0..S with S = max(a, b).
    Sample s sits at fractional offsets (s*a/S, s*b/S) from the edge start
    in the two index coordinates; each offset is split into an integer part
    and a linear-interpolation weight. The final sample is expressed with
    weight 1 on the right neighbor so lookups never index past the end of
    the arrays (the blended value is unchanged).
    """
    n_moves = moves.shape[0]
    width = int(moves.max()) + 1
    k1 = np.zeros((n_moves, width), dtype=np.int64)
    w1 = np.zeros((n_moves, width))
    k2 = np.zeros((n_moves, width), dtype=np.int64)
    w2 = np.zeros((n_moves, width))
    n_samp = np.zeros(n_moves, dtype=np.int64)
    scale = np.zeros(n_moves)
    root_slope = np.zeros(n_moves)
    for m, (a, b) in enumerate(moves):
        s_max = max(a, b)
        n_samp[m] = s_max + 1
        scale[m] = a / s_max
        root_slope[m] = np.sqrt(b / a)
        for s in range(s_max + 1):
            for k_arr, w_arr, step in ((k1, w1, a), (k2, w2, b)):
                off = s * step / s_max
                k = int(off)
                w = off - k
                if w == 0.0 and k > 0:
                    k -= 1
                    w = 1.0
                k_arr[m, s] = k
                w_arr[m, s] = w
    return k1, w1, k2, w2, n_samp, scale, root_slope


_K1, _W1, _K2, _W2, _NSAMP, _SCALE, _ROOT = _build_tables(MOVES)


@njit(cache=True)
def _sample_values(q, ks, ws, n_samp, steps):
    """Interpolated q-values for every (move, edge start, sample) triple."""
    T = q.shape[0]
    n_moves = ks.shape[0]
    width = ks.shape[1]
    out = np.empty((n_moves, T, width))
    for m in range(n_moves):
        step = steps[m]
        for p0 in range(T - step):
            for s in range(n_samp[m]):
                p = p0 + ks[m, s]
                w = ws[m, s]
                out[m, p0, s] = q[p] * (1.0 - w) + q[p + 1] * w
    return out


@njit(cache=True)
def _dp_core(q1, q2, h, moves, k1, w1, k2, w2, n_samp, scale, root):
    """Run the DP sweep; returns (cost table, chosen-move table)."""
    T = q1.shape[0]
    n_moves = moves.shape[0]
    v1 = _sample_values(q1, k1, w1, n_samp, moves[:, 0])
    v2 = _sample_values(q2, k2, w2, n_samp, moves[:, 1])
    cost = np.full((T, T), np.inf)
    choice = np.full((T, T), -1, dtype=np.int16)
    cost[0, 0] = 0.0
    for i in range(1, T):
        for j in range(1, T):
            best = np.inf
            best_m = -1
            for m in range(n_moves):
                i0 = i - moves[m, 0]
                j0 = j - moves[m, 1]
                if i0 < 0 or j0 < 0:
                    continue
                prev = cost[i0, j0]
                if prev == np.inf:
                    continue
                sm = root[m]
                acc = 0.0
                last = n_samp[m] - 1
                for s in range(last + 1):
                    d = v1[m, i0, s] - sm * v2[m, j0, s]
                    y = d * d
                    if s == 0 or s == last:
                        acc += 0.5 * y
                    else:
                        acc += y
                c = prev + (scale[m] * h) * acc
                if c < best:
                    best = c
                    best_m = m
            cost[i, j] = best
            choice[i, j] = best_m
    return cost, choice


@njit(cache=True)
def _warp_from_choice(choice, moves, t):
    """Backtrack the optimal path and sample it at every grid index."""
    T = choice.shape[0]
    gamma = np.empty(T)
    i = T - 1
    j = T - 1
    gamma[T - 1] = t[T - 1]
    while i > 0:
        m = choice[i, j]
        a = moves[m, 0]
        b = moves[m, 1]
        i0 = i - a
        j0 = j - b
        for k in range(i0, i):
            gamma[k] = t[j0] + (k - i0) / a * (t[j] - t[j0])
        i = i0
        j = j0
    return gamma


@njit(cache=True)
def _register_one(q1, q2, t, moves, k1, w1, k2, w2, n_samp, scale, root):
    h = 1.0 / (t.shape[0] - 1)
    cost, choice = _dp_core(q1, q2, h, moves, k1, w1, k2, w2, n_samp, scale, root)
    T = q1.shape[0]
    gamma = _warp_from_choice(choice, moves, t)
    return gamma, cost[T - 1, T - 1]


@njit(cache=True, parallel=True)
def _register_many(q1, q2_stack, t, moves, k1, w1, k2, w2, n_samp, scale, root):
    n, T = q2_stack.shape
    gammas = np.empty((n, T))
    costs = np.empty(n)
    for r in prange(n):
        g, c = _register_one(q1, q2_stack[r], t, moves, k1, w1, k2, w2, n_samp, scale, root)
        gammas[r] = g
        costs[r] = c
    return gammas, costs


def dp_register(q1, q2, t, moves=MOVES):
    """Optimal warp values on the grid `t` and the squared registration cost."""
    return _register_one(q1, q2, t, moves, _K1, _W1, _K2, _W2, _NSAMP, _SCALE, _ROOT)


def dp_register_batch(q1, q2_stack, t, moves=MOVES):
    """Register each row of q2_stack to q1; rows are independent.

    Outputs are written to disjoint slots, so results are identical for any
    number of worker threads.
    """
    return _register_many(q1, q2_stack, t, moves, _K1, _W1, _K2, _W2, _NSAMP, _SCALE, _ROOT)


def edge_cost_tables(moves=MOVES):
    """The shared sample tables, for reference implementations and tests."""
    if moves is MOVES:
        return _K1, _W1, _K2, _W2, _NSAMP, _SCALE, _ROOT
    return _build_tables(moves)

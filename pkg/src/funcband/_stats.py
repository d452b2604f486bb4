"""Order-statistic helpers shared by smoothing and conformal calibration."""

from __future__ import annotations

import math

import numpy as np

# Absorbs float fuzz in beta*m so that mathematically integer products do
# not get bumped to the next order statistic.
_CEIL_FUZZ = 1e-9


def ceil_index(beta: float, m: int) -> int:
    """The ceil(beta*m)-th order statistic index, clamped to [1, m]."""
    k = math.ceil(beta * m - _CEIL_FUZZ)
    return min(max(k, 1), m)


def lower_quantile(values, beta: float) -> float:
    """Lower beta quantile: the ceil(beta*m)-th smallest of m values."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("values must be nonempty")
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must be in (0, 1]")
    k = ceil_index(beta, arr.size)
    return float(np.partition(arr, k - 1)[k - 1])


def sorted_sum(arr: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum after sorting along `axis`.

    Sorting canonicalizes the addend order, so results are bit-identical
    under any permutation of the inputs; conformal band endpoints rely on
    this for exact permutation symmetry.
    """
    return np.sum(np.sort(arr, axis=axis), axis=axis)

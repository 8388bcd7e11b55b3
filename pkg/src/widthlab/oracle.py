"""Brute-force verification engines used by the test suites.

Deliberately shares no integration code with the main modules: the grid rule
and the Haar-coefficient definition are re-implemented from scratch here so a
bug in the library cannot hide behind an identical bug in its oracle.
Randomness is numpy's default PCG64 generator; seeds are recorded in every
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, EvaluationError, ParameterError

MAX_RESOLUTION = 24

# Gauss-Legendre 2-point abscissae on (0, 1)
_NODE_LO = 0.5 - 0.5 / math.sqrt(3.0)
_NODE_HI = 0.5 + 0.5 / math.sqrt(3.0)


@dataclass(frozen=True)
class QuadEstimate:
    """Integral estimate with an error bar (0 for deterministic rules)."""

    value: float
    std_error: float
    samples: int
    seed: int | None = None

    def __post_init__(self):
        if self.std_error < 0.0:
            raise ParameterError("std_error must be >= 0")


def _check_finite(vals: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("integrand produced a non-finite value")
    return vals


def _gauss2_cells(f, a: float, b: float, n_cells: int) -> float:
    h = (b - a) / n_cells
    starts = a + h * np.arange(n_cells)
    v_lo = _check_finite(np.asarray(f(starts + _NODE_LO * h), dtype=float))
    v_hi = _check_finite(np.asarray(f(starts + _NODE_HI * h), dtype=float))
    return float(0.5 * h * (np.sum(v_lo) + np.sum(v_hi)))


def grid_integral(f, resolution: int) -> QuadEstimate:
    """Composite two-point Gauss over 2^resolution equal cells of [0, 1].

    Exact (std_error 0) for piecewise polynomials of degree <= 3 whose
    breakpoints lie on the cell grid.  The integrand must accept ndarray
    arguments.
    """
    if resolution > MAX_RESOLUTION:
        raise CapacityError(f"resolution {resolution} exceeds cap {MAX_RESOLUTION}")
    if resolution < 0:
        raise ParameterError("resolution must be >= 0")
    cells = 1 << resolution
    return QuadEstimate(_gauss2_cells(f, 0.0, 1.0, cells), 0.0, 2 * cells)


def mc_integral(f, samples: int, seed: int) -> QuadEstimate:
    """Uniform Monte-Carlo estimate of the integral of f over [0, 1]."""
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    vals = _check_finite(np.asarray(f(rng.random(samples)), dtype=float))
    value = float(np.mean(vals))
    std_error = float(np.std(vals, ddof=1) / math.sqrt(samples))
    return QuadEstimate(value, std_error, samples, seed)


def haar_coefficient_direct(f, k: int, j: int, resolution: int) -> float:
    """Haar coefficient straight from the definition, via the grid rule.

    2^k * (integral over [(j-1)/2^k, (j-1/2)/2^k]
           - integral over [(j-1/2)/2^k, j/2^k]),
    each half integrated with 2^resolution Gauss-2 cells.
    """
    if resolution > MAX_RESOLUTION:
        raise CapacityError(f"resolution {resolution} exceeds cap {MAX_RESOLUTION}")
    if not 1 <= j <= (1 << k):
        raise ParameterError(f"position j={j} invalid at level k={k}")
    cells = 1 << resolution
    left_edge = (j - 1) / (1 << k)
    mid = (2 * j - 1) / (1 << (k + 1))
    right_edge = j / (1 << k)
    left = _gauss2_cells(f, left_edge, mid, cells)
    right = _gauss2_cells(f, mid, right_edge, cells)
    return float(2.0 ** k * (left - right))

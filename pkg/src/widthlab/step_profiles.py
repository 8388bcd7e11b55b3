"""Closed-form profiles of step-function Haar coefficients and the dual
certificate family built from them.

For the step chi_t (+1 before t, -1 after), the level-(k, j) Haar coefficient
as a function of t is a tent supported on the dyadic cell of (k, j):

    X_{k,j}(t) = X_{0,1}(2^k t - (j-1)),   X_{0,1}(t) = 1 - |2t - 1|.

The certificate profile recenters and rescales the tent,

    Z_{k,j}(t) = 2^k * A * (X_{k,j}(t) - 1/2)   on the cell, 0 elsewhere,

with A = sqrt(12) chosen so that A^2 * int (X_{0,1} - 1/2)^2 = 1.  The family
is orthogonal across indices with int Z_{k,j}^2 = 2^k, has vanishing zeroth
and first moments, and is isotropic for the weighted inner product.

Each cell owns its closed left endpoint; t = 1 belongs to the last cell.
"""

from __future__ import annotations

import math

import numpy as np

from .haar_core import CoefVector, DyadicIndex, LevelRange, PiecewisePolynomial

# Normalizer of the centered tent: A^2 * int_0^1 (X_{0,1}(s) - 1/2)^2 ds = 1.
A = math.sqrt(12.0)


def tent(u):
    """The unit tent 1 - |2u - 1| on [0, 1], 0 outside."""
    u = np.asarray(u, dtype=float)
    return np.where((u >= 0.0) & (u <= 1.0), 1.0 - np.abs(2.0 * u - 1.0), 0.0)


def x_profile(idx: DyadicIndex, t: float) -> float:
    """Haar coefficient of the step chi_t at idx, as a function of t."""
    u = np.ldexp(float(t), idx.k) - (idx.j - 1)
    if 0.0 <= u <= 1.0:
        return 1.0 - abs(2.0 * u - 1.0)
    return 0.0


def _owns(idx: DyadicIndex, t: float, u: float) -> bool:
    return (0.0 <= u < 1.0) or (t == 1.0 and idx.j == (1 << idx.k))


def z_profile(idx: DyadicIndex, t: float) -> float:
    """Certificate profile 2^k A (X_{k,j}(t) - 1/2) on the owning cell else 0."""
    u = np.ldexp(float(t), idx.k) - (idx.j - 1)
    if _owns(idx, float(t), u):
        x = 1.0 - abs(2.0 * u - 1.0)
        return float(np.ldexp(A * (x - 0.5), idx.k))
    return 0.0


def owning_cells(levels: LevelRange, t: np.ndarray) -> np.ndarray:
    """(n_levels, T) 0-based cell index of each t at each level."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ks = np.arange(levels.k0, levels.k1 + 1)
    scaled = np.ldexp(t[None, :], ks[:, None])
    top = (1 << ks)[:, None] - 1
    return np.minimum(scaled.astype(np.int64), top)


def x_values_by_level(levels: LevelRange, t: np.ndarray, cells: np.ndarray | None = None):
    """(n_levels, T) values of the owning-cell tail X_{k, j*(t)}(t).

    All other positions at each level are zero (the tent vanishes at cell
    boundaries), so together with `owning_cells` this is the whole of X(t).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if cells is None:
        cells = owning_cells(levels, t)
    ks = np.arange(levels.k0, levels.k1 + 1)
    u = np.ldexp(t[None, :], ks[:, None]) - cells
    return 1.0 - np.abs(2.0 * u - 1.0)


def z_values_by_level(levels: LevelRange, t: np.ndarray, cells: np.ndarray | None = None):
    """(n_levels, T) values of Z_{k, j*(t)}(t) at the owning cells."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if cells is None:
        cells = owning_cells(levels, t)
    x = x_values_by_level(levels, t, cells)
    ks = np.arange(levels.k0, levels.k1 + 1)
    return np.ldexp(A * (x - 0.5), ks[:, None])


def x_profile_values(idx: DyadicIndex, t) -> np.ndarray:
    """Vectorized x_profile over an array of t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u = np.ldexp(t, idx.k) - (idx.j - 1)
    return np.where((u >= 0.0) & (u <= 1.0), 1.0 - np.abs(2.0 * u - 1.0), 0.0)


def z_profile_values(idx: DyadicIndex, t) -> np.ndarray:
    """Vectorized z_profile over an array of t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u = np.ldexp(t, idx.k) - (idx.j - 1)
    own = ((u >= 0.0) & (u < 1.0)) | ((t == 1.0) & (idx.j == (1 << idx.k)))
    x = 1.0 - np.abs(2.0 * u - 1.0)
    return np.where(own, np.ldexp(A * (x - 0.5), idx.k), 0.0)


def x_value_matrix(levels: LevelRange, t: np.ndarray) -> np.ndarray:
    """(N, T) matrix whose column at node t is the full vector X(t)."""
    return _value_matrix(levels, t, "x")


def z_value_matrix(levels: LevelRange, t: np.ndarray) -> np.ndarray:
    """(N, T) matrix whose column at node t is the full vector Z(t)."""
    return _value_matrix(levels, t, "z")


def _value_matrix(levels: LevelRange, t: np.ndarray, which: str) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cells = owning_cells(levels, t)
    vals = (x_values_by_level if which == "x" else z_values_by_level)(levels, t, cells)
    out = np.zeros((levels.size, t.size))
    cols = np.arange(t.size)
    for li, k in enumerate(levels.levels()):
        out[levels.level_offset(k) + cells[li], cols] = vals[li]
    return out


def x_vector(t: float, levels: LevelRange) -> CoefVector:
    """X(t): all Haar coefficients of chi_t over the range, as one vector."""
    data = np.zeros(levels.size)
    tt = np.array([float(t)])
    cells = owning_cells(levels, tt)
    vals = x_values_by_level(levels, tt, cells)
    for li, k in enumerate(levels.levels()):
        data[levels.level_offset(k) + int(cells[li, 0])] = vals[li, 0]
    return CoefVector(levels, data)


def z_vector(t: float, levels: LevelRange) -> CoefVector:
    """Z(t): at most one nonzero position per level (cells partition [0,1])."""
    data = np.zeros(levels.size)
    tt = np.array([float(t)])
    cells = owning_cells(levels, tt)
    vals = z_values_by_level(levels, tt, cells)
    for li, k in enumerate(levels.levels()):
        data[levels.level_offset(k) + int(cells[li, 0])] = vals[li, 0]
    return CoefVector(levels, data)


def _support_edges(idx: DyadicIndex) -> np.ndarray:
    pts = [idx.support_left, idx.support_mid, idx.support_right]
    return np.unique(np.concatenate([[0.0, 1.0], pts]))


def x_profile_pp(idx: DyadicIndex) -> PiecewisePolynomial:
    """X_{k,j} as an exact piecewise-linear function of t."""
    edges = _support_edges(idx)
    slope = float(np.ldexp(2.0, idx.k))
    c0 = np.zeros(edges.size - 1)
    c1 = np.zeros(edges.size - 1)
    i_rise = int(np.searchsorted(edges, idx.support_left))
    c1[i_rise] = slope
    c0[i_rise + 1] = 1.0
    c1[i_rise + 1] = -slope
    return PiecewisePolynomial.from_values(edges, c0, c1)


def z_profile_pp(idx: DyadicIndex) -> PiecewisePolynomial:
    """Z_{k,j} as an exact piecewise-linear function of t (discontinuous)."""
    edges = _support_edges(idx)
    amp = float(np.ldexp(A, idx.k - 1))  # 2^k * A / 2
    slope = float(np.ldexp(2.0 * A, 2 * idx.k))  # 2^k * A * 2^(k+1)
    c0 = np.zeros(edges.size - 1)
    c1 = np.zeros(edges.size - 1)
    i_rise = int(np.searchsorted(edges, idx.support_left))
    c0[i_rise] = -amp
    c1[i_rise] = slope
    c0[i_rise + 1] = amp
    c1[i_rise + 1] = -slope
    return PiecewisePolynomial.from_values(edges, c0, c1)


def z_gram(idx1: DyadicIndex, idx2: DyadicIndex) -> float:
    """Exact value of int Z_{idx1} Z_{idx2} dt: 2^k on the diagonal, else 0.

    Same level: supports are essentially disjoint.  Nested supports: the
    coarser profile is linear across the finer one's cell, whose zeroth and
    first moments vanish.
    """
    if idx1 == idx2:
        return float(np.ldexp(1.0, idx1.k))
    return 0.0


def z_moments(idx: DyadicIndex, t0: float) -> tuple[float, float]:
    """(int Z dt, int (t - t0) Z dt), by exact piecewise integration.

    Both vanish for every index and every t0.
    """
    zpp = z_profile_pp(idx)
    m0 = zpp.integrate()
    linear = PiecewisePolynomial.from_values([0.0, 1.0], [-float(t0)], [1.0])
    m1 = (zpp * linear).integrate()
    return float(m0), float(m1)

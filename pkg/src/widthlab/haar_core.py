"""Dyadic Haar machinery, the weighted coefficient space, and exact
integration of piecewise polynomials on [0, 1].

Conventions used throughout the package:

* The Haar function at level k, position j (1-based) is supported on
  [(j-1)*2^-k, j*2^-k], equals +1 on the left half and -1 on the right half,
  and is L_inf-normalized.  Its coefficient functional is
  ``c_{k,j}(f) = 2^k * (integral over left half - integral over right half)``.
* Point evaluation at a jump is right-continuous: every point belongs to the
  piece whose closed left endpoint covers it, and t = 1 belongs to the last
  piece.  This is a measure-zero choice; integrals never see it.
* Coefficient vectors over levels k0..k1 are stored flat, level-major, j
  ascending inside a level, with weights w(k, j) = 2^-k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from .errors import CapacityError, EvaluationError, ParameterError, ShapeError

_INV_SQRT3 = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class DyadicIndex:
    """Level/position address (k, j) of one Haar function, 1 <= j <= 2^k."""

    k: int
    j: int

    def __post_init__(self):
        if self.k < 0:
            raise ParameterError(f"level k must be >= 0, got {self.k}")
        if not 1 <= self.j <= (1 << self.k):
            raise ParameterError(
                f"position j must satisfy 1 <= j <= 2^{self.k}, got {self.j}"
            )

    @property
    def support_left(self) -> float:
        return (self.j - 1) * 2.0 ** -self.k

    @property
    def support_mid(self) -> float:
        return (2 * self.j - 1) * 2.0 ** -(self.k + 1)

    @property
    def support_right(self) -> float:
        return self.j * 2.0 ** -self.k


@dataclass(frozen=True)
class LevelRange:
    """Contiguous levels k0..k1; holds 2^(k1+1) - 2^k0 coordinates."""

    k0: int
    k1: int

    def __post_init__(self):
        if self.k0 < 0:
            raise ParameterError(f"k0 must be >= 0, got {self.k0}")
        if self.k1 < self.k0:
            raise ParameterError(f"need k0 <= k1, got ({self.k0}, {self.k1})")

    @property
    def size(self) -> int:
        return (1 << (self.k1 + 1)) - (1 << self.k0)

    @property
    def n_levels(self) -> int:
        return self.k1 - self.k0 + 1

    def levels(self) -> range:
        return range(self.k0, self.k1 + 1)

    def level_offset(self, k: int) -> int:
        if not self.k0 <= k <= self.k1:
            raise ShapeError(f"level {k} outside range ({self.k0}, {self.k1})")
        return (1 << k) - (1 << self.k0)

    def level_slice(self, k: int) -> slice:
        off = self.level_offset(k)
        return slice(off, off + (1 << k))

    def flat_index(self, idx: DyadicIndex) -> int:
        return self.level_offset(idx.k) + idx.j - 1

    def indices(self) -> Iterator[DyadicIndex]:
        for k in self.levels():
            for j in range(1, (1 << k) + 1):
                yield DyadicIndex(k, j)

    def weights(self) -> np.ndarray:
        """Flat weight vector, 2^-k repeated 2^k times per level."""
        return _weights(self.k0, self.k1)


@lru_cache(maxsize=None)
def _weights(k0: int, k1: int) -> np.ndarray:
    w = np.concatenate([np.full(1 << k, 2.0 ** -k) for k in range(k0, k1 + 1)])
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class CoefVector:
    """Element of the weighted coefficient space over a LevelRange."""

    levels: LevelRange
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=float)
        if arr.shape != (self.levels.size,):
            raise ShapeError(
                f"coordinate count {arr.shape} does not match range size "
                f"{self.levels.size}"
            )
        object.__setattr__(self, "data", arr)

    @classmethod
    def zero(cls, levels: LevelRange) -> "CoefVector":
        return cls(levels, np.zeros(levels.size))

    @classmethod
    def unit(cls, levels: LevelRange, idx: DyadicIndex) -> "CoefVector":
        data = np.zeros(levels.size)
        data[levels.flat_index(idx)] = 1.0
        return cls(levels, data)

    def get(self, idx: DyadicIndex) -> float:
        return float(self.data[self.levels.flat_index(idx)])

    def level_block(self, k: int) -> np.ndarray:
        return self.data[self.levels.level_slice(k)]


def _same_range(x: CoefVector, y: CoefVector) -> LevelRange:
    if x.levels != y.levels:
        raise ShapeError(f"mismatched ranges {x.levels} vs {y.levels}")
    return x.levels


def weighted_inner(x: CoefVector, y: CoefVector) -> float:
    """<x, y>_w = sum_k 2^-k sum_j x_{k,j} y_{k,j}."""
    levels = _same_range(x, y)
    return float(np.dot(x.data * levels.weights(), y.data))


def weighted_norm(x: CoefVector, p: float) -> float:
    """(sum_k 2^-k sum_j |x_{k,j}|^p)^(1/p) for finite p >= 1."""
    if not np.isfinite(p) or p < 1.0:
        raise ParameterError(f"p must be finite and >= 1, got {p}")
    w = x.levels.weights()
    return float(np.dot(w, np.abs(x.data) ** p) ** (1.0 / p))


def pack_lq_norm_q(x: CoefVector, k: int, q: float) -> float:
    """2^-k sum_j |x_{k,j}|^q, the q-th power of the level-k pack norm.

    Equals ||P_k f||_{L_q}^q exactly when x holds the Haar coefficients of f:
    level-k Haar functions have disjoint supports of length 2^-k and values
    of unit magnitude.
    """
    block = x.level_block(k)  # raises ShapeError when k outside range
    return float(2.0 ** -k * np.sum(np.abs(block) ** q))


class PiecewisePolynomial:
    """Polynomial pieces of degree <= 2 on consecutive subintervals of [0, 1].

    Piece i lives on [breakpoints[i], breakpoints[i+1]) and is stored in the
    local variable u = t - breakpoints[i]:  value = c0 + c1*u + c2*u^2.
    """

    __slots__ = ("breakpoints", "coeffs")

    def __init__(self, breakpoints, coeffs):
        bp = np.ascontiguousarray(breakpoints, dtype=float)
        cf = np.ascontiguousarray(coeffs, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ShapeError("need at least two breakpoints")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ShapeError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) <= 0.0):
            raise ShapeError("breakpoints must be strictly increasing")
        if cf.shape != (bp.size - 1, 3):
            raise ShapeError(
                f"need coefficients of shape ({bp.size - 1}, 3), got {cf.shape}"
            )
        self.breakpoints = bp
        self.coeffs = cf

    @classmethod
    def constant(cls, value: float) -> "PiecewisePolynomial":
        return cls([0.0, 1.0], [[value, 0.0, 0.0]])

    @classmethod
    def from_values(cls, breakpoints, c0, c1=None, c2=None) -> "PiecewisePolynomial":
        """Build from per-piece coefficient arrays (missing orders are zero)."""
        bp = np.asarray(breakpoints, dtype=float)
        m = bp.size - 1
        cf = np.zeros((m, 3))
        cf[:, 0] = c0
        if c1 is not None:
            cf[:, 1] = c1
        if c2 is not None:
            cf[:, 2] = c2
        return cls(bp, cf)

    @property
    def n_pieces(self) -> int:
        return self.breakpoints.size - 1

    def piece_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_pieces, dtype=int)
        deg[self.coeffs[:, 1] != 0.0] = 1
        deg[self.coeffs[:, 2] != 0.0] = 2
        return deg

    def _piece_of(self, t: np.ndarray) -> np.ndarray:
        i = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(i, 0, self.n_pieces - 1)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        i = self._piece_of(t_arr)
        u = t_arr - self.breakpoints[i]
        c = self.coeffs[i]
        out = c[..., 0] + u * (c[..., 1] + u * c[..., 2])
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def cumulative(self, p) -> np.ndarray:
        """Exact antiderivative: integral from 0 to each point of p."""
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        widths = np.diff(self.breakpoints)
        c = self.coeffs
        full = widths * (c[:, 0] + widths * (c[:, 1] / 2.0 + widths * c[:, 2] / 3.0))
        prefix = np.concatenate([[0.0], np.cumsum(full)])
        i = self._piece_of(p_arr)
        u = p_arr - self.breakpoints[i]
        ci = c[i]
        tail = u * (ci[:, 0] + u * (ci[:, 1] / 2.0 + u * ci[:, 2] / 3.0))
        return prefix[i] + tail

    def integrate(self, a: float = 0.0, b: float = 1.0) -> float:
        vals = self.cumulative(np.array([a, b]))
        return float(vals[1] - vals[0])

    def _rebased(self, edges: np.ndarray) -> np.ndarray:
        """Local coefficients of this pp on pieces defined by `edges`."""
        mids = 0.5 * (edges[:-1] + edges[1:])
        i = self._piece_of(mids)
        d = edges[:-1] - self.breakpoints[i]
        c = self.coeffs[i]
        out = np.empty_like(c)
        out[:, 0] = c[:, 0] + d * (c[:, 1] + d * c[:, 2])
        out[:, 1] = c[:, 1] + 2.0 * d * c[:, 2]
        out[:, 2] = c[:, 2]
        return out

    def _merge_edges(self, other: "PiecewisePolynomial") -> np.ndarray:
        return np.union1d(self.breakpoints, other.breakpoints)

    def __add__(self, other):
        if isinstance(other, PiecewisePolynomial):
            edges = self._merge_edges(other)
            return PiecewisePolynomial(edges, self._rebased(edges) + other._rebased(edges))
        cf = self.coeffs.copy()
        cf[:, 0] += float(other)
        return PiecewisePolynomial(self.breakpoints, cf)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (other * -1.0 if isinstance(other, PiecewisePolynomial) else -float(other))

    def __mul__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            return PiecewisePolynomial(self.breakpoints, self.coeffs * float(other))
        edges = self._merge_edges(other)
        a = self._rebased(edges)
        b = other._rebased(edges)
        bad = (a[:, 2] != 0.0) & ((b[:, 1] != 0.0) | (b[:, 2] != 0.0))
        bad |= (b[:, 2] != 0.0) & (a[:, 1] != 0.0)
        if np.any(bad):
            raise ParameterError("product would exceed degree 2")
        out = np.empty((edges.size - 1, 3))
        out[:, 0] = a[:, 0] * b[:, 0]
        out[:, 1] = a[:, 0] * b[:, 1] + a[:, 1] * b[:, 0]
        out[:, 2] = a[:, 0] * b[:, 2] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 0]
        return PiecewisePolynomial(edges, out)

    __rmul__ = __mul__

    def continuity_gaps(self) -> np.ndarray:
        """|left limit - right value| at each interior breakpoint."""
        interior = self.breakpoints[1:-1]
        u = interior - self.breakpoints[:-2]
        c = self.coeffs[:-1]
        left = c[:, 0] + u * (c[:, 1] + u * c[:, 2])
        right = self.coeffs[1:, 0]
        return np.abs(left - right)


def step_function(t: float) -> PiecewisePolynomial:
    """The step +1 on [0, t), -1 on [t, 1], as an exact piecewise constant."""
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"step parameter must lie in [0, 1], got {t}")
    if t == 0.0:
        return PiecewisePolynomial.constant(-1.0)
    if t == 1.0:
        return PiecewisePolynomial.constant(1.0)
    return PiecewisePolynomial.from_values([0.0, t, 1.0], [1.0, -1.0])


def integrate_exact(pp: PiecewisePolynomial) -> float:
    """Antiderivative-based integral of a piecewise polynomial over [0, 1]."""
    return pp.integrate(0.0, 1.0)


def _integrate_gauss2_per_piece(pp: PiecewisePolynomial) -> float:
    # cross-check path: two-point Gauss per piece, exact for degree <= 3
    a = pp.breakpoints[:-1]
    h = np.diff(pp.breakpoints)
    lo = a + h * 0.5 * (1.0 - _INV_SQRT3)
    hi = a + h * 0.5 * (1.0 + _INV_SQRT3)
    return float(np.sum(0.5 * h * (pp(lo) + pp(hi))))


def haar_coefficient(
    f,
    idx: DyadicIndex,
    *,
    cells_per_half: int | None = None,
) -> float:
    """Haar coefficient 2^k (int over left half - int over right half) of f.

    Piecewise polynomials are integrated exactly.  Other callables are
    integrated by a composite two-point Gauss rule with ``cells_per_half``
    subdivisions on each half (default 8); align the subdivision with the
    finest dyadic structure of f for exact results.
    """
    l, m, r = idx.support_left, idx.support_mid, idx.support_right
    if isinstance(f, PiecewisePolynomial):
        vals = f.cumulative(np.array([l, m, r]))
        left, right = vals[1] - vals[0], vals[2] - vals[1]
    else:
        cells = 8 if cells_per_half is None else int(cells_per_half)
        if cells < 1:
            raise ParameterError("cells_per_half must be >= 1")
        left = _gauss2_callable(f, l, m, cells)
        right = _gauss2_callable(f, m, r, cells)
    return float(np.ldexp(left - right, idx.k))


def _gauss2_callable(f: Callable, a: float, b: float, cells: int) -> float:
    h = (b - a) / cells
    starts = a + h * np.arange(cells)
    lo = starts + h * 0.5 * (1.0 - _INV_SQRT3)
    hi = starts + h * 0.5 * (1.0 + _INV_SQRT3)
    va, vb = np.asarray(f(lo), dtype=float), np.asarray(f(hi), dtype=float)
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise EvaluationError("function handle produced a non-finite value")
    return float(np.sum(0.5 * h * (va + vb)))


def haar_coefficients(pp: PiecewisePolynomial, levels: LevelRange) -> CoefVector:
    """All Haar coefficients of a piecewise polynomial over a range, exactly."""
    parts = []
    for k in levels.levels():
        j = np.arange(1 << k, dtype=float)
        l = np.ldexp(j, -k)
        m = np.ldexp(2.0 * j + 1.0, -(k + 1))
        r = np.ldexp(j + 1.0, -k)
        vals = pp.cumulative(np.concatenate([l, m, r]))
        n = 1 << k
        fl, fm, fr = vals[:n], vals[n : 2 * n], vals[2 * n :]
        parts.append(np.ldexp(2.0 * fm - fl - fr, k))
    return CoefVector(levels, np.concatenate(parts))


def dyadic_gauss_nodes(level: int, oversample: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two-point Gauss nodes/weights on the dyadic cells of a given level.

    Exact for integrands that are piecewise cubic on that cell grid.  Nodes
    are returned in ascending order so reductions are deterministic.
    """
    if level + oversample > 24:
        raise CapacityError(f"requested resolution {level + oversample} exceeds cap 24")
    cells = 1 << (level + max(0, int(oversample)))
    h = 1.0 / cells
    starts = np.arange(cells) * h
    lo = starts + h * 0.5 * (1.0 - _INV_SQRT3)
    hi = starts + h * 0.5 * (1.0 + _INV_SQRT3)
    nodes = np.empty(2 * cells)
    nodes[0::2] = lo
    nodes[1::2] = hi
    return nodes, np.full(2 * cells, 0.5 * h)

"""Subspace construction, weighted orthonormalization and projection, and
the approximant families H(t) used by the certificate.

A Subspace holds an orthonormal basis for the weighted inner product as the
rows of a dense matrix.  An ApproximantFamily represents a rule t -> H(t)
with H(t) always inside its subspace; it is stored through its basis
coordinates, which keeps inner products against the profile vectors cheap
and makes membership exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import CapacityError, EmptySubspaceError, ParameterError, ShapeError
from .haar_core import (
    CoefVector,
    LevelRange,
    PiecewisePolynomial,
    dyadic_gauss_nodes,
    haar_coefficients,
)
from .step_profiles import owning_cells, x_values_by_level, z_values_by_level

GRAM_TOL = 1e-10
_CHUNK = 2048


@dataclass(frozen=True)
class Subspace:
    """Orthonormal (for <.,.>_w) basis of an n-dimensional subspace."""

    levels: LevelRange
    basis: np.ndarray = field(repr=False)  # (dim, N), rows orthonormal
    dropped: int = 0

    def __post_init__(self):
        b = np.ascontiguousarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[1] != self.levels.size:
            raise ShapeError(f"basis shape {b.shape} does not match range size "
                             f"{self.levels.size}")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def gram_deviation(self) -> float:
        w = self.levels.weights()
        g = (self.basis * w) @ self.basis.T
        return float(np.max(np.abs(g - np.eye(self.dim)))) if self.dim else 0.0

    def vectors(self) -> list[CoefVector]:
        return [CoefVector(self.levels, row.copy()) for row in self.basis]


def orthonormalize(raw, levels: LevelRange | None = None) -> Subspace:
    """Orthonormalize vectors under <.,.>_w, dropping dependent inputs.

    `raw` is a sequence of CoefVector sharing one range, or an (m, N) array
    with `levels` given.  Uses column-pivoted QR on the isometric coordinates
    sqrt(w) * x, so the result is numerically stable; the number of dropped
    inputs is reported on the Subspace.
    """
    if isinstance(raw, np.ndarray):
        if levels is None:
            raise ParameterError("levels required when passing a raw matrix")
        mat = np.ascontiguousarray(raw, dtype=float)
    else:
        vecs = list(raw)
        if not vecs:
            raise EmptySubspaceError("no input vectors")
        levels = vecs[0].levels
        for v in vecs[1:]:
            if v.levels != levels:
                raise ShapeError("input vectors must share one range")
        mat = np.stack([v.data for v in vecs])
    if mat.ndim != 2 or mat.shape[1] != levels.size:
        raise ShapeError(f"raw matrix shape {mat.shape} does not match range")

    sqrt_w = np.sqrt(levels.weights())
    y = (mat * sqrt_w).T  # (N, m), columns are candidate vectors
    q, r, _ = scipy.linalg.qr(y, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        raise EmptySubspaceError("all input vectors are zero")
    rank = int(np.sum(diag > diag[0] * max(y.shape) * np.finfo(float).eps))
    basis = (q[:, :rank] / sqrt_w[:, None]).T
    return Subspace(levels, basis, dropped=mat.shape[0] - rank)


def project(V: Subspace, x: CoefVector) -> CoefVector:
    """Orthogonal projection of x onto V for the weighted inner product."""
    if x.levels != V.levels:
        raise ShapeError("vector range does not match subspace range")
    coords = V.basis @ (V.levels.weights() * x.data)
    return CoefVector(V.levels, coords @ V.basis)


def matrix_profile_inner(
    mat: np.ndarray, levels: LevelRange, t: np.ndarray, profile: str
) -> np.ndarray:
    """(m, T) weighted inner products of the rows of mat with X(t) or Z(t).

    Exploits that X(t) and Z(t) have one active position per level.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cells = owning_cells(levels, t)
    if profile == "x":
        vals = x_values_by_level(levels, t, cells)
    elif profile == "z":
        vals = z_values_by_level(levels, t, cells)
    else:
        raise ParameterError(f"unknown profile {profile!r}")
    acc = np.zeros((mat.shape[0], t.size))
    for li, k in enumerate(levels.levels()):
        cols = levels.level_offset(k) + cells[li]
        acc += (2.0 ** -k * vals[li]) * mat[:, cols]
    return acc


def basis_profile_inner(V: Subspace, t: np.ndarray, profile: str) -> np.ndarray:
    """(dim, T) inner products <v_m, X(t)>_w or <v_m, Z(t)>_w."""
    return matrix_profile_inner(V.basis, V.levels, t, profile)


def x_norm_sq(levels: LevelRange, t: np.ndarray) -> np.ndarray:
    """||X(t)||_{2,w}^2 per node; always <= 2^(1-k0)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    vals = x_values_by_level(levels, t)
    ks = np.arange(levels.k0, levels.k1 + 1)
    return np.sum(np.ldexp(vals * vals, -ks[:, None]), axis=0)


@dataclass(frozen=True)
class ApproximantFamily:
    """A rule t -> H(t) in a fixed subspace, stored via basis coordinates."""

    rule: str
    subspace: Subspace
    coords: Callable[[np.ndarray], np.ndarray] = field(repr=False)  # (dim, T)
    linear_in_t: bool = True

    @property
    def levels(self) -> LevelRange:
        return self.subspace.levels

    def coeff_matrix(self, t: np.ndarray) -> np.ndarray:
        """Dense (T, N) coefficient vectors H(t); O(T*dim*N), chunk callers."""
        return self.coords(t).T @ self.subspace.basis

    def vector_at(self, t: float) -> CoefVector:
        return CoefVector(self.levels, self.coeff_matrix(np.array([float(t)]))[0])


def best_l2_family(V: Subspace) -> ApproximantFamily:
    """H(t) = projection of X(t) onto V; for each t the L2-optimal choice."""
    return ApproximantFamily(
        rule="best_l2",
        subspace=V,
        coords=lambda t: basis_profile_inner(V, t, "x"),
    )


def zero_family(V: Subspace) -> ApproximantFamily:
    return ApproximantFamily(
        rule="zero",
        subspace=V,
        coords=lambda t: np.zeros((V.dim, np.atleast_1d(np.asarray(t)).size)),
    )


def scaled_l2_family(V: Subspace, scale: float) -> ApproximantFamily:
    """A deliberately suboptimal rule: scale times the L2 projection."""
    return ApproximantFamily(
        rule=f"scaled_l2({scale:g})",
        subspace=V,
        coords=lambda t: float(scale) * basis_profile_inner(V, t, "x"),
    )


class BestLqResult(NamedTuple):
    vector: CoefVector
    coords: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _qnorm_objective(levels: LevelRange, resid: np.ndarray, q: float) -> float:
    return float(np.dot(levels.weights(), np.abs(resid) ** q) ** (1.0 / q))


def best_lq_on_grid(
    V: Subspace,
    t: float,
    q: float,
    tol: float = 1e-10,
    max_iter: int = 500,
    weight_floor: float = 1e-12,
) -> BestLqResult:
    """Minimize ||X(t) - h||_{q,w} over h in V by reweighted least squares.

    q > 2 makes the objective smooth but flat near zero residuals, so the
    reweighting factors |r|^(q-2) are floored and the update is relaxed by
    1/(q-1).  Stops on relative objective decrease below tol; hitting the
    iteration cap returns the best iterate with converged=False.
    """
    if q <= 2.0:
        raise ParameterError(f"q must exceed 2, got {q}")
    levels = V.levels
    w = levels.weights()
    from .step_profiles import x_vector

    x = x_vector(t, levels).data
    B = V.basis
    coords = B @ (w * x)  # L2 projection as the starting point
    relax = 1.0 / (q - 1.0)

    best_coords = coords.copy()
    best_obj = _qnorm_objective(levels, x - coords @ B, q)
    prev_obj = best_obj
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        resid = x - coords @ B
        u = w * np.maximum(np.abs(resid) ** (q - 2.0), weight_floor)
        g = (B * u) @ B.T
        rhs = (B * u) @ x
        try:
            target = np.linalg.solve(g, rhs)
        except np.linalg.LinAlgError:
            target = np.linalg.lstsq(g, rhs, rcond=None)[0]
        coords = coords + relax * (target - coords)
        obj = _qnorm_objective(levels, x - coords @ B, q)
        if obj < best_obj:
            best_obj = obj
            best_coords = coords.copy()
        if prev_obj > 0.0 and abs(prev_obj - obj) <= tol * prev_obj:
            converged = True
            break
        prev_obj = obj
    return BestLqResult(
        vector=CoefVector(levels, best_coords @ B),
        coords=best_coords,
        objective=best_obj,
        iterations=iterations,
        converged=converged,
    )


def best_lq_family(V: Subspace, q: float, tol: float = 1e-8) -> ApproximantFamily:
    """Pointwise q-norm minimizer; solves one IRLS problem per node."""

    def coords(t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((V.dim, t.size))
        for i, ti in enumerate(t):
            out[:, i] = best_lq_on_grid(V, float(ti), q, tol=tol).coords
        return out

    return ApproximantFamily(rule="best_lq", subspace=V, coords=coords,
                             linear_in_t=False)


def family_haar_truncation(n: int, levels: LevelRange) -> Subspace:
    """First n coordinate directions in level-major order, unit norm."""
    N = levels.size
    if n > N:
        raise CapacityError(f"n={n} exceeds the {N} coordinates of {levels}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    basis = np.zeros((n, N))
    w = levels.weights()
    basis[np.arange(n), np.arange(n)] = 1.0 / np.sqrt(w[:n])
    return Subspace(levels, basis)


def _hat_pp(knots: np.ndarray, i: int) -> PiecewisePolynomial:
    edges = [0.0]
    c0, c1 = [], []
    xi = knots[i]
    if i > 0:
        lo = knots[i - 1]
        if lo > 0.0:
            c0.append(0.0); c1.append(0.0)
            edges.append(lo)
        c0.append(0.0); c1.append(1.0 / (xi - lo))
        edges.append(xi)
    if i < knots.size - 1:
        hi = knots[i + 1]
        c0.append(1.0); c1.append(-1.0 / (hi - xi))
        edges.append(hi)
    if edges[-1] < 1.0:
        c0.append(0.0); c1.append(0.0)
        edges.append(1.0)
    return PiecewisePolynomial.from_values(np.array(edges), np.array(c0), np.array(c1))


def family_uniform_spline(n: int, levels: LevelRange) -> Subspace:
    """Coefficient images of hat functions on n equispaced breakpoints.

    The coefficient map kills constants, so the resulting dimension is n-1
    (reported via `dropped`).  Coefficients are exact, not sampled.
    """
    if n > levels.size:
        raise CapacityError(f"n={n} exceeds the {levels.size} coordinates of {levels}")
    if n < 2:
        raise ParameterError("need at least 2 breakpoints")
    knots = np.linspace(0.0, 1.0, n)
    raw = np.stack([haar_coefficients(_hat_pp(knots, i), levels).data
                    for i in range(n)])
    return orthonormalize(raw, levels)


def family_random(n: int, levels: LevelRange, seed) -> Subspace:
    """Orthonormalized standard-normal vectors from a seeded generator."""
    N = levels.size
    if n > N:
        raise CapacityError(f"n={n} exceeds the {N} coordinates of {levels}")
    rng = np.random.default_rng(seed)
    return orthonormalize(rng.standard_normal((n, N)), levels)


def sup_grid(levels: LevelRange, extra_levels: int = 2) -> np.ndarray:
    """Dyadic points of level k1+extra plus cell midpoints, ascending."""
    m = 1 << (levels.k1 + extra_levels)
    pts = np.arange(2 * m + 1) / (2.0 * m)
    return pts


class ErrorScan(NamedTuple):
    sup_q: float
    avg_q: float
    avg_2: float
    quad_level: int


def residual_q_powers(
    family: ApproximantFamily, t: np.ndarray, q: float, chunk: int = _CHUNK
) -> np.ndarray:
    """||X(t) - H(t)||_{q,w}^q per node, via dense residuals in chunks."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    levels = family.levels
    w = levels.weights()
    out = np.empty(t.size)
    for s in range(0, t.size, chunk):
        seg = slice(s, min(t.size, s + chunk))
        ts = t[seg]
        resid = -family.coeff_matrix(ts)
        cells = owning_cells(levels, ts)
        vals = x_values_by_level(levels, ts, cells)
        rows = np.arange(ts.size)
        for li, k in enumerate(levels.levels()):
            resid[rows, levels.level_offset(k) + cells[li]] += vals[li]
        out[seg] = (np.abs(resid) ** q) @ w
    return out


def residual_2_powers(family: ApproximantFamily, t: np.ndarray) -> np.ndarray:
    """||X(t) - H(t)||_{2,w}^2 per node, without dense residuals.

    Uses ||X||^2 - 2<a, c> + ||c||^2, so values below ~1e-15 * ||X||^2 are
    cancellation noise (clamped at 0).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = family.coords(t)
    a = basis_profile_inner(family.subspace, t, "x")
    val = x_norm_sq(family.levels, t) - 2.0 * np.sum(a * c, axis=0) + np.sum(c * c, axis=0)
    return np.maximum(val, 0.0)


def sup_error_scan(
    family: ApproximantFamily,
    q: float,
    oversample: int | None = None,
    sup_extra_levels: int = 2,
) -> ErrorScan:
    """Sup and power means of the coefficient errors of an approximant rule.

    avg_q^q and avg_2^2 are quadratures over the two-point Gauss grid on the
    dyadic cells of level k1+1 (oversampled for rules nonlinear in t); the
    sup is taken over the dyadic grid of level k1+sup_extra_levels plus
    midpoints.
    """
    if q <= 2.0:
        raise ParameterError(f"q must exceed 2, got {q}")
    levels = family.levels
    if oversample is None:
        oversample = 0 if family.linear_in_t else 3
    quad_level = levels.k1 + 1 + oversample
    nodes, gw = dyadic_gauss_nodes(levels.k1 + 1, oversample)
    avg_q = float(np.dot(gw, residual_q_powers(family, nodes, q))) ** (1.0 / q)
    avg_2 = math.sqrt(max(0.0, float(np.dot(gw, residual_2_powers(family, nodes)))))
    grid = sup_grid(levels, sup_extra_levels)
    sup_q = float(np.max(residual_q_powers(family, grid, q))) ** (1.0 / q)
    return ErrorScan(sup_q=sup_q, avg_q=avg_q, avg_2=avg_2, quad_level=quad_level)


RULES: dict[str, Callable[..., ApproximantFamily]] = {
    "best_l2": lambda V, q=None: best_l2_family(V),
    "zero": lambda V, q=None: zero_family(V),
    "best_lq": lambda V, q: best_lq_family(V, q),
}

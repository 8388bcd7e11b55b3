import math

import numpy as np
import pytest

from widthlab.errors import CapacityError, EmptySubspaceError, ParameterError, ShapeError
from widthlab.haar_core import CoefVector, DyadicIndex, LevelRange, weighted_inner, weighted_norm
from widthlab.approximants import (
    RULES,
    Subspace,
    basis_profile_inner,
    best_l2_family,
    best_lq_family,
    best_lq_on_grid,
    family_haar_truncation,
    family_random,
    family_uniform_spline,
    matrix_profile_inner,
    orthonormalize,
    project,
    residual_2_powers,
    residual_q_powers,
    scaled_l2_family,
    sup_error_scan,
    x_norm_sq,
    zero_family,
)
from widthlab.step_profiles import x_vector, z_vector

LEVELS = LevelRange(2, 5)  # N = 56


def random_subspace(dim, levels=LEVELS, seed=0):
    return family_random(dim, levels, seed)


# ---------------------------------------------------------------------------
# orthonormalization


def test_orthonormalize_units():
    raw = [CoefVector.unit(LEVELS, DyadicIndex(2, 1)),
           CoefVector.unit(LEVELS, DyadicIndex(4, 7))]
    V = orthonormalize(raw)
    assert V.dim == 2 and V.dropped == 0
    # units scale by 2^(k/2) to reach unit weighted norm
    norms = [weighted_norm(v, 2.0) for v in V.vectors()]
    assert norms == pytest.approx([1.0, 1.0], rel=1e-14)
    mags = np.sort(np.abs(V.basis[V.basis != 0.0]))
    assert mags == pytest.approx([2.0, 4.0], rel=1e-14)  # 2^(2/2), 2^(4/2)


def test_orthonormalize_duplicate_dropped(rng):
    v = CoefVector(LEVELS, rng.standard_normal(LEVELS.size))
    V = orthonormalize([v, v])
    assert V.dim == 1
    assert V.dropped == 1


def test_orthonormalize_random_gram(rng):
    V = orthonormalize(rng.standard_normal((20, LEVELS.size)), LEVELS)
    assert V.dim == 20
    assert V.gram_deviation() < 1e-10


def test_orthonormalize_errors(rng):
    with pytest.raises(EmptySubspaceError):
        orthonormalize([CoefVector.zero(LEVELS)])
    with pytest.raises(EmptySubspaceError):
        orthonormalize([])
    with pytest.raises(ShapeError):
        orthonormalize([CoefVector.zero(LEVELS), CoefVector.zero(LevelRange(2, 6))])
    with pytest.raises(ParameterError):
        orthonormalize(rng.standard_normal((3, LEVELS.size)))  # levels missing


# ---------------------------------------------------------------------------
# projection


def test_project_idempotent_and_contractive(rng):
    V = random_subspace(8, seed=1)
    for _ in range(20):
        x = CoefVector(LEVELS, rng.standard_normal(LEVELS.size))
        px = project(V, x)
        ppx = project(V, px)
        assert np.allclose(px.data, ppx.data, atol=1e-10)
        assert weighted_norm(px, 2.0) <= weighted_norm(x, 2.0) + 1e-12
        resid = CoefVector(LEVELS, x.data - px.data)
        for v in V.vectors():
            assert abs(weighted_inner(resid, v)) < 1e-9


def test_project_in_and_out_of_subspace(rng):
    V = random_subspace(5, seed=2)
    inside = CoefVector(LEVELS, rng.standard_normal(5) @ V.basis)
    assert np.allclose(project(V, inside).data, inside.data, atol=1e-10)
    # build a vector orthogonal to V
    x = CoefVector(LEVELS, rng.standard_normal(LEVELS.size))
    ortho = CoefVector(LEVELS, x.data - project(V, x).data)
    assert np.max(np.abs(project(V, ortho).data)) < 1e-9


def test_project_symmetry(rng):
    V = random_subspace(7, seed=3)
    for _ in range(10):
        x = CoefVector(LEVELS, rng.standard_normal(LEVELS.size))
        y = CoefVector(LEVELS, rng.standard_normal(LEVELS.size))
        lhs = weighted_inner(project(V, x), y)
        rhs = weighted_inner(x, project(V, y))
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_project_range_mismatch():
    V = random_subspace(3)
    with pytest.raises(ShapeError):
        project(V, CoefVector.zero(LevelRange(2, 6)))


# ---------------------------------------------------------------------------
# families of approximants


def test_best_l2_full_space_is_exact(rng):
    V = family_haar_truncation(LEVELS.size, LEVELS)
    fam = best_l2_family(V)
    for t in rng.random(10):
        h = fam.vector_at(float(t))
        assert np.allclose(h.data, x_vector(float(t), LEVELS).data, atol=1e-12)
    scan = sup_error_scan(fam, q=4.0)
    assert scan.sup_q == pytest.approx(0.0, abs=1e-12)
    assert scan.avg_q == pytest.approx(0.0, abs=1e-12)
    # avg_2 goes through the cancellation shortcut; its floor is ~sqrt(eps)
    assert scan.avg_2 == pytest.approx(0.0, abs=1e-7)


def test_zero_family_error_is_x_norm(rng):
    V = random_subspace(4, seed=4)
    fam = zero_family(V)
    ts = rng.random(30)
    assert np.allclose(residual_2_powers(fam, ts), x_norm_sq(LEVELS, ts), atol=1e-14)


def test_best_l2_optimality_sampled(rng):
    V = random_subspace(6, seed=5)
    fam = best_l2_family(V)
    for t in rng.random(5):
        x = x_vector(float(t), LEVELS)
        h = fam.vector_at(float(t))
        best = weighted_norm(CoefVector(LEVELS, x.data - h.data), 2.0)
        for _ in range(100):
            u = rng.standard_normal(V.dim) @ V.basis
            other = weighted_norm(CoefVector(LEVELS, x.data - u), 2.0)
            assert best <= other + 1e-12


def test_family_membership_residual(rng):
    # H(t) must lie in the subspace: projection residual < 1e-9
    V = random_subspace(5, seed=6)
    for fam in (best_l2_family(V), scaled_l2_family(V, 0.7), best_lq_family(V, 4.0)):
        for t in rng.random(3):
            h = fam.vector_at(float(t))
            resid = h.data - project(V, h).data
            assert np.max(np.abs(resid)) < 1e-9


# ---------------------------------------------------------------------------
# q-norm solver


def test_best_lq_full_space(rng):
    V = family_haar_truncation(LEVELS.size, LEVELS)
    t = float(rng.random())
    res = best_lq_on_grid(V, t, q=4.0)
    assert np.allclose(res.vector.data, x_vector(t, LEVELS).data, atol=1e-8)
    assert res.objective <= 1e-8


def test_best_lq_matches_golden_section():
    V = family_random(1, LEVELS, 7)
    t, q = 0.41, 3.5
    x = x_vector(t, LEVELS)
    v = V.basis[0]

    def objective(s):
        return weighted_norm(CoefVector(LEVELS, x.data - s * v), q)

    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = -10.0, 10.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    for _ in range(200):
        if objective(c) < objective(d):
            b, d = d, c
            c = b - gr * (b - a)
        else:
            a, c = c, d
            d = a + gr * (b - a)
    s_gold = 0.5 * (a + b)
    res = best_lq_on_grid(V, t, q, tol=1e-14)
    assert res.coords[0] == pytest.approx(s_gold, abs=1e-6)


def test_best_lq_beats_l2_start(rng):
    V = random_subspace(6, seed=8)
    w = LEVELS.weights()
    for t in rng.random(5):
        x = x_vector(float(t), LEVELS)
        l2_coords = V.basis @ (w * x.data)
        l2_obj = weighted_norm(CoefVector(LEVELS, x.data - l2_coords @ V.basis), 4.0)
        res = best_lq_on_grid(V, float(t), 4.0)
        assert res.objective <= l2_obj + 1e-12


def test_best_lq_iteration_cap_flag():
    V = random_subspace(6, seed=9)
    res = best_lq_on_grid(V, 0.3, 4.0, tol=0.0, max_iter=3)
    assert not res.converged
    assert res.iterations == 3
    with pytest.raises(ParameterError):
        best_lq_on_grid(V, 0.3, 2.0)


# ---------------------------------------------------------------------------
# built-in subspace families


def test_haar_truncation_spans_level():
    levels = LevelRange(3, 5)
    V = family_haar_truncation(8, levels)  # 2^3 vectors: exactly level 3
    assert V.dim == 8
    for row in V.basis:
        assert np.all(row[8:] == 0.0)
        assert np.count_nonzero(row[:8]) == 1
    assert V.gram_deviation() < 1e-14


def test_family_capacity_and_determinism():
    with pytest.raises(CapacityError):
        family_haar_truncation(LEVELS.size + 1, LEVELS)
    with pytest.raises(CapacityError):
        family_random(LEVELS.size + 1, LEVELS, 0)
    a = family_random(10, LEVELS, 1234)
    b = family_random(10, LEVELS, 1234)
    assert a.basis.tobytes() == b.basis.tobytes()  # bit-for-bit
    c = family_random(10, LEVELS, 1235)
    assert a.basis.tobytes() != c.basis.tobytes()


def test_uniform_spline_dim_and_monotonicity():
    levels = LevelRange(3, 5)
    errs = []
    for n in (8, 16, 32):
        V = family_uniform_spline(n, levels)
        assert V.dim == n - 1  # constants lie in the kernel of the coefficient map
        fam = best_l2_family(V)
        errs.append(float(residual_2_powers(fam, np.array([1.0 / 3.0]))[0]))
    assert errs[0] > errs[1] > errs[2]


def test_nested_haar_truncations_monotone(rng):
    # nested subspaces: pointwise errors weakly decrease
    levels = LevelRange(2, 5)
    ts = rng.random(40)
    prev = None
    for n in (4, 8, 16, 32):
        fam = best_l2_family(family_haar_truncation(n, levels))
        errs = residual_2_powers(fam, ts)
        if prev is not None:
            assert np.all(errs <= prev + 1e-12)
        prev = errs


# ---------------------------------------------------------------------------
# scans and batch inner products


def test_profile_inner_matches_vectors(rng):
    V = random_subspace(6, seed=10)
    ts = rng.random(25)
    ax = basis_profile_inner(V, ts, "x")
    az = basis_profile_inner(V, ts, "z")
    for col, t in enumerate(ts):
        xv = x_vector(float(t), LEVELS)
        zv = z_vector(float(t), LEVELS)
        for m, v in enumerate(V.vectors()):
            assert ax[m, col] == pytest.approx(weighted_inner(v, xv), abs=1e-12)
            assert az[m, col] == pytest.approx(weighted_inner(v, zv), abs=1e-11)
    with pytest.raises(ParameterError):
        matrix_profile_inner(V.basis, LEVELS, ts, "y")


def test_residual_q_powers_matches_norms(rng):
    V = random_subspace(6, seed=11)
    fam = best_l2_family(V)
    ts = rng.random(10)
    vals = residual_q_powers(fam, ts, 4.0)
    for col, t in enumerate(ts):
        x = x_vector(float(t), LEVELS)
        h = fam.vector_at(float(t))
        ref = weighted_norm(CoefVector(LEVELS, x.data - h.data), 4.0) ** 4.0
        assert vals[col] == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_sup_error_scan_ordering(rng):
    V = random_subspace(10, seed=12)
    scan = sup_error_scan(best_l2_family(V), q=4.0)
    assert scan.sup_q >= scan.avg_q > 0.0
    assert scan.avg_2 > 0.0
    with pytest.raises(ParameterError):
        sup_error_scan(best_l2_family(V), q=2.0)


def test_rules_registry():
    V = random_subspace(3, seed=13)
    for name in ("best_l2", "zero", "best_lq"):
        fam = RULES[name](V, 4.0)
        assert fam.subspace is V

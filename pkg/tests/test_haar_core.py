import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from widthlab.errors import (
    CapacityError,
    EvaluationError,
    ParameterError,
    ShapeError,
)
from widthlab.haar_core import (
    CoefVector,
    DyadicIndex,
    LevelRange,
    PiecewisePolynomial,
    _integrate_gauss2_per_piece,
    dyadic_gauss_nodes,
    haar_coefficient,
    haar_coefficients,
    integrate_exact,
    pack_lq_norm_q,
    step_function,
    weighted_inner,
    weighted_norm,
)
from widthlab import oracle


def haar_pp(idx: DyadicIndex) -> PiecewisePolynomial:
    """The Haar function itself as an exact piecewise constant (test helper)."""
    edges = np.unique([0.0, idx.support_left, idx.support_mid, idx.support_right, 1.0])
    mids = 0.5 * (edges[:-1] + edges[1:])
    vals = np.zeros(edges.size - 1)
    vals[(mids > idx.support_left) & (mids < idx.support_mid)] = 1.0
    vals[(mids > idx.support_mid) & (mids < idx.support_right)] = -1.0
    return PiecewisePolynomial.from_values(edges, vals)


# ---------------------------------------------------------------------------
# domain types


def test_dyadic_index_validation():
    idx = DyadicIndex(3, 5)
    assert (idx.support_left, idx.support_mid, idx.support_right) == (0.5, 0.5625, 0.625)
    with pytest.raises(ParameterError):
        DyadicIndex(-1, 1)
    with pytest.raises(ParameterError):
        DyadicIndex(2, 0)
    with pytest.raises(ParameterError):
        DyadicIndex(2, 5)


def test_level_range_counts():
    levels = LevelRange(3, 6)
    assert levels.size == 2 ** 7 - 2 ** 3
    assert levels.n_levels == 4
    assert levels.level_offset(3) == 0
    assert levels.level_offset(4) == 8
    assert levels.flat_index(DyadicIndex(4, 1)) == 8
    assert len(list(levels.indices())) == levels.size
    assert levels.weights().sum() == pytest.approx(4.0)  # one unit of mass per level
    with pytest.raises(ParameterError):
        LevelRange(4, 3)
    with pytest.raises(ShapeError):
        levels.level_offset(7)


def test_coef_vector_shape():
    levels = LevelRange(1, 2)
    with pytest.raises(ShapeError):
        CoefVector(levels, np.zeros(5))
    unit = CoefVector.unit(levels, DyadicIndex(2, 3))
    assert unit.get(DyadicIndex(2, 3)) == 1.0
    assert unit.data.sum() == 1.0
    assert CoefVector.zero(levels).data.shape == (6,)


# ---------------------------------------------------------------------------
# weighted inner product and norms


def test_weighted_inner_units():
    levels = LevelRange(0, 4)
    for k, j in [(0, 1), (2, 3), (4, 16)]:
        unit = CoefVector.unit(levels, DyadicIndex(k, j))
        assert weighted_inner(unit, unit) == pytest.approx(2.0 ** -k, rel=1e-15)
    zero = CoefVector.zero(levels)
    assert weighted_inner(zero, zero) == 0.0


def test_weighted_inner_matches_double_sum(rng):
    levels = LevelRange(2, 5)
    for _ in range(20):
        x = CoefVector(levels, rng.standard_normal(levels.size))
        y = CoefVector(levels, rng.standard_normal(levels.size))
        brute = sum(
            2.0 ** -k * sum(x.level_block(k)[j] * y.level_block(k)[j]
                            for j in range(1 << k))
            for k in levels.levels()
        )
        assert weighted_inner(x, y) == pytest.approx(brute, rel=1e-13, abs=1e-13)


def test_weighted_inner_range_mismatch():
    x = CoefVector.zero(LevelRange(1, 3))
    y = CoefVector.zero(LevelRange(1, 4))
    with pytest.raises(ShapeError):
        weighted_inner(x, y)


def test_weighted_norm_unit_and_p2():
    levels = LevelRange(0, 5)
    unit = CoefVector.unit(levels, DyadicIndex(3, 2))
    for p in (1.0, 2.0, 2.5, 4.0):
        assert weighted_norm(unit, p) == pytest.approx(2.0 ** (-3.0 / p), rel=1e-14)
    x = CoefVector(levels, np.random.default_rng(3).standard_normal(levels.size))
    assert weighted_norm(x, 2.0) ** 2 == pytest.approx(weighted_inner(x, x), rel=1e-13)


def test_weighted_norm_bad_p():
    x = CoefVector.zero(LevelRange(0, 1))
    with pytest.raises(ParameterError):
        weighted_norm(x, 0.5)
    with pytest.raises(ParameterError):
        weighted_norm(x, math.inf)


def test_holder_inequality_random_pairs(rng):
    # 10^4 random pairs for each exponent pair (p, p')
    levels = LevelRange(2, 5)
    n = levels.size
    w = levels.weights()
    q = 4.0
    for p in (2.0, q, q / (q - 1.0)):
        pc = p / (p - 1.0) if p > 1.0 else math.inf
        xs = rng.standard_normal((10_000, n))
        ys = rng.standard_normal((10_000, n))
        inner = np.sum(xs * w * ys, axis=1)
        nx = (np.abs(xs) ** p @ w) ** (1.0 / p)
        ny = (np.abs(ys) ** pc @ w) ** (1.0 / pc)
        assert np.all(inner <= nx * ny * (1.0 + 1e-12))


# ---------------------------------------------------------------------------
# pack norms


def test_pack_lq_norm_examples():
    levels = LevelRange(0, 3)
    x = CoefVector.zero(levels)
    x.data[0] = 2.0
    assert pack_lq_norm_q(x, 0, 4.0) == 16.0
    # coefficients of f = h_{k,j}: a single unit at (k, j)
    unit = CoefVector.unit(levels, DyadicIndex(2, 2))
    for q in (2.5, 3.0, 4.0):
        assert pack_lq_norm_q(unit, 2, q) == pytest.approx(2.0 ** -2, rel=1e-15)
    with pytest.raises(ShapeError):
        pack_lq_norm_q(x, 4, 4.0)


def test_pack_lq_norm_grid_oracle(rng):
    # 100 random vectors per level, vs quadrature of |P_k f|^q at level k+4
    q = 3.0
    for k in range(0, 5):
        levels = LevelRange(k, k)
        for _ in range(100):
            x = CoefVector(levels, rng.standard_normal(levels.size))

            def pack(t, x=x, k=k):
                t = np.asarray(t)
                cell = np.minimum((np.ldexp(t, k)).astype(np.int64), (1 << k) - 1)
                inner = np.ldexp(t, k) - cell
                sign = np.where(inner < 0.5, 1.0, -1.0)
                return np.abs(x.data[cell] * sign) ** q

            est = oracle.grid_integral(pack, resolution=k + 4)
            assert pack_lq_norm_q(x, k, q) == pytest.approx(est.value, rel=1e-9)


# ---------------------------------------------------------------------------
# piecewise polynomials


def test_pp_validation():
    with pytest.raises(ShapeError):
        PiecewisePolynomial([0.0, 0.5], [[1, 0, 0], [2, 0, 0]])
    with pytest.raises(ShapeError):
        PiecewisePolynomial([0.0, 0.7, 0.5, 1.0], np.zeros((3, 3)))
    with pytest.raises(ShapeError):
        PiecewisePolynomial([0.5, 1.0], [[1, 0, 0]])


def test_pp_right_continuous_evaluation():
    pp = step_function(0.5)
    assert pp(0.5) == -1.0  # jump point owned by the right piece
    assert pp(0.49999) == 1.0
    assert pp(1.0) == -1.0
    assert pp(0.0) == 1.0
    gaps = pp.continuity_gaps()
    assert gaps.shape == (1,) and gaps[0] == 2.0


def test_pp_integrate_constant_and_tent():
    assert integrate_exact(PiecewisePolynomial.constant(1.0)) == 1.0
    tent = PiecewisePolynomial.from_values([0.0, 0.5, 1.0], [0.0, 1.0], [2.0, -2.0])
    assert integrate_exact(tent) == pytest.approx(0.5, abs=1e-15)
    centered = tent + (-0.5)
    sq = centered * centered
    assert integrate_exact(sq) == pytest.approx(1.0 / 12.0, abs=1e-15)


def test_pp_gauss_agreement(rng):
    # antiderivative and per-piece Gauss-2 must agree for degree <= 2
    for _ in range(25):
        edges = np.unique(np.concatenate([[0.0, 1.0], rng.random(4)]))
        coeffs = rng.standard_normal((edges.size - 1, 3))
        pp = PiecewisePolynomial(edges, coeffs)
        assert integrate_exact(pp) == pytest.approx(
            _integrate_gauss2_per_piece(pp), rel=1e-13, abs=1e-13)


def test_pp_integrate_mc_oracle(rng):
    for seed in range(4):
        edges = np.unique(np.concatenate([[0.0, 1.0], rng.random(3)]))
        pp = PiecewisePolynomial(edges, rng.standard_normal((edges.size - 1, 3)))
        est = oracle.mc_integral(pp, samples=200_000, seed=seed)
        assert abs(integrate_exact(pp) - est.value) <= 4.0 * est.std_error


def test_pp_product_degree_cap():
    quad = PiecewisePolynomial.from_values([0.0, 1.0], [1.0], [0.0], [1.0])
    line = PiecewisePolynomial.from_values([0.0, 1.0], [0.0], [1.0])
    with pytest.raises(ParameterError):
        quad * line
    assert integrate_exact(quad * PiecewisePolynomial.constant(2.0)) == pytest.approx(
        2.0 * (1.0 + 1.0 / 3.0))


def test_pp_cumulative_matches_integrate(rng):
    edges = np.unique(np.concatenate([[0.0, 1.0], rng.random(5)]))
    pp = PiecewisePolynomial(edges, rng.standard_normal((edges.size - 1, 3)))
    pts = rng.random(50)
    cum = pp.cumulative(pts)
    for p, c in zip(pts, cum):
        assert c == pytest.approx(pp.integrate(0.0, p), rel=1e-13, abs=1e-14)


# ---------------------------------------------------------------------------
# haar coefficients


def test_haar_coefficient_step_quarter():
    assert haar_coefficient(step_function(0.25), DyadicIndex(0, 1)) == pytest.approx(
        0.5, abs=1e-15)


def test_haar_coefficient_constant_and_self():
    const = PiecewisePolynomial.constant(3.7)
    for idx in (DyadicIndex(0, 1), DyadicIndex(2, 3), DyadicIndex(5, 17)):
        assert haar_coefficient(const, idx) == pytest.approx(0.0, abs=1e-12)
        assert haar_coefficient(haar_pp(idx), idx) == pytest.approx(1.0, abs=1e-12)


def test_haar_coefficient_callable_path():
    idx = DyadicIndex(1, 2)
    # smooth handle; Gauss-2 is exact on cubics
    got = haar_coefficient(lambda t: t ** 3, idx, cells_per_half=4)
    ref = oracle.haar_coefficient_direct(lambda t: t ** 3, idx.k, idx.j, resolution=4)
    assert got == pytest.approx(ref, rel=1e-13)
    with pytest.raises(EvaluationError):
        haar_coefficient(lambda t: np.where(t > 0.2, np.nan, 1.0), DyadicIndex(0, 1))
    with pytest.raises(ParameterError):
        haar_coefficient(lambda t: t, idx, cells_per_half=0)


def test_haar_coefficients_batch(rng):
    levels = LevelRange(1, 5)
    edges = np.unique(np.concatenate([[0.0, 1.0], rng.random(4)]))
    pp = PiecewisePolynomial(edges, rng.standard_normal((edges.size - 1, 3)))
    batch = haar_coefficients(pp, levels)
    for idx in levels.indices():
        assert batch.get(idx) == pytest.approx(
            haar_coefficient(pp, idx), rel=1e-12, abs=1e-12)


def test_step_function_edges():
    assert step_function(0.0)(0.3) == -1.0
    assert step_function(1.0)(0.3) == 1.0
    with pytest.raises(ParameterError):
        step_function(1.5)


def test_parseval_truncated_span(rng):
    # ||f||_2^2 = (int f)^2 + sum_k 2^-k sum_j c_{k,j}^2 on span{1, levels 0..K}
    K = 5
    cells = 1 << (K + 1)
    edges = np.arange(cells + 1) / cells
    for _ in range(10):
        vals = rng.uniform(-2.0, 2.0, cells)
        pp = PiecewisePolynomial.from_values(edges, vals)
        levels = LevelRange(0, K)
        coefs = haar_coefficients(pp, levels)
        lhs = integrate_exact(pp * pp)
        rhs = integrate_exact(pp) ** 2 + float(
            np.dot(levels.weights(), coefs.data ** 2))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_dyadic_gauss_nodes():
    nodes, weights = dyadic_gauss_nodes(3)
    assert nodes.size == 16 and np.all(np.diff(nodes) > 0)
    assert weights.sum() == pytest.approx(1.0, rel=1e-15)
    # exact for cubics on the cell grid
    val = float(np.dot(weights, nodes ** 3))
    assert val == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(CapacityError):
        dyadic_gauss_nodes(20, oversample=10)

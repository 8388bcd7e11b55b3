"""The certificate quantities I1, I2, I3, the Holder lower bound on the
q-average coefficient error, and the dichotomy evaluation.

Everything here works in the weighted coefficient space, where the duality

    int <X - H, Z>_w dt <= (int ||X-H||_{q,w}^q dt)^{1/q} (int ||Z||_{q',w}^{q'} dt)^{1/q'}

is constant-free and exactly checkable in floating point, so

    (int ||X - H||_{q,w}^q dt)^{1/q}  >=  (I1 - I2) / I3^{1/q'}.

The bridge from coefficient norms to function-space L_q norms carries an
unspecified equivalence constant and is never folded into the bound.

t-quadrature runs on two-point Gauss nodes over the dyadic cells of level
k1+1: exact whenever H(t) is piecewise linear in t on that grid (the
integrands are then piecewise quadratic), oversampled otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .approximants import (
    ApproximantFamily,
    RULES,
    Subspace,
    basis_profile_inner,
    residual_q_powers,
    residual_2_powers,
    sup_grid,
    x_norm_sq,
)
from .errors import LemmaRegimeError, ParameterError, ShapeError
from .haar_core import LevelRange, dyadic_gauss_nodes
from .step_profiles import A, x_values_by_level, z_values_by_level

# Safe default for the dichotomy threshold, obtained by running the shipped
# calibration (bisection over the acceptance battery: families
# haar_truncation / uniform_spline / random, q=4, gamma=0.3, n in 64..1024,
# max feasible delta ~= 0.061).  Data, not a derived constant.
DEFAULT_DELTA = 0.05

DEFAULT_OVERSAMPLE = 3
ISOTROPY_GRAM_TOL = 1e-8


@dataclass(frozen=True)
class CertificateConfig:
    """Parameters of one certification run."""

    n: int
    q: float
    gamma: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if not 2.0 < self.q < math.inf:
            raise ParameterError(f"q must lie in (2, inf), got {self.q}")
        if self.gamma * self.q <= 1.0:
            raise ParameterError(
                f"gamma must exceed 1/q = {1.0 / self.q:.6g}, got {self.gamma}"
            )
        if self.delta <= 0.0:
            raise ParameterError(f"delta must be positive, got {self.delta}")

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def l2_threshold(self) -> float:
        return self.delta * self.n ** -0.5 * math.log(self.n)

    @property
    def lq_threshold(self) -> float:
        return self.n ** -self.gamma


def level_range(n: int, gamma: float, q: float) -> LevelRange:
    """k0 = floor(log2 n), k1 = floor(gamma*q*log2 n).

    Raises LemmaRegimeError with the minimal valid n when k1 < k0 (small n or
    gamma*q too close to or below 1).
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    k0 = n.bit_length() - 1  # exact floor(log2 n)
    # the 1e-9 nudge protects exact products like 1.2 * 10 from fp round-down
    k1 = math.floor(gamma * q * math.log2(n) + 1e-9)
    if k1 < k0:
        raise LemmaRegimeError(
            f"lemma regime not reached: k1={k1} < k0={k0} at n={n} "
            f"(minimal valid n is {_min_valid_n(gamma, q)})",
            _min_valid_n(gamma, q),
        )
    return LevelRange(k0, k1)


def _min_valid_n(gamma: float, q: float, k0_cap: int = 40) -> int:
    gq = gamma * q
    if gq <= 0.0:
        return -1
    for k0 in range(1, k0_cap + 1):
        # smallest n in [2^k0, 2^(k0+1)) with gq*log2(n) >= k0
        lo = 1 << k0
        cand = lo if gq * k0 >= k0 else math.ceil(2.0 ** (k0 / gq))
        if cand < (1 << (k0 + 1)):
            return max(cand, lo, 2)
    return -1


def compute_I1(levels: LevelRange) -> float:
    """int <X(t), Z(t)>_w dt = (k1 - k0 + 1) / sqrt(12), exactly.

    Each index contributes int X_{k,j} Z_{k,j} dt = 1/A independent of (k,j),
    and the 2^-k weights cancel the 2^k indices per level.
    """
    return levels.n_levels / A


def xz_inner_values(levels: LevelRange, t: np.ndarray) -> np.ndarray:
    """<X(t), Z(t)>_w per node (one active position per level)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xs = x_values_by_level(levels, t)
    zs = z_values_by_level(levels, t)
    ks = np.arange(levels.k0, levels.k1 + 1)
    return np.sum(np.ldexp(xs * zs, -ks[:, None]), axis=0)


def i1_quadrature(levels: LevelRange, oversample: int = 0) -> float:
    """Gauss quadrature of int <X, Z>_w dt; exact (piecewise quadratic)."""
    nodes, gw = dyadic_gauss_nodes(levels.k1 + 1, oversample)
    return float(np.dot(gw, xz_inner_values(levels, nodes)))


def compute_I2(
    family: ApproximantFamily,
    levels: LevelRange | None = None,
    oversample: int | None = None,
) -> float:
    """int <H(t), Z(t)>_w dt over the Gauss grid of level k1+1.

    Exact when H is piecewise linear in t on that grid; nonlinear rules get
    2^oversample subcells (default 3).
    """
    if levels is None:
        levels = family.levels
    elif levels != family.levels:
        raise ShapeError("family range does not match requested range")
    if oversample is None:
        oversample = 0 if family.linear_in_t else DEFAULT_OVERSAMPLE
    nodes, gw = dyadic_gauss_nodes(levels.k1 + 1, oversample)
    c = family.coords(nodes)
    b = basis_profile_inner(family.subspace, nodes, "z")
    return float(np.dot(gw, np.sum(c * b, axis=0)))


def compute_I3(levels: LevelRange, q: float) -> float:
    """int ||Z(t)||_{q',w}^{q'} dt in closed form.

    With q' = q/(q-1): each cell contributes
    2^{kq'} A^{q'} * 2^-k * int_0^1 |X_{0,1}(s) - 1/2|^{q'} ds, and
    int_0^1 |X_{0,1}(s) - 1/2|^{q'} ds = 2^{-q'} / (q'+1), so

        I3 = A^{q'} 2^{-q'} / (q'+1) * sum_{k=k0}^{k1} 2^{k(q'-1)}.
    """
    if q <= 2.0:
        raise ParameterError(f"q must exceed 2, got {q}")
    qc = q / (q - 1.0)
    geom = sum(2.0 ** (k * (qc - 1.0)) for k in levels.levels())
    return A ** qc * 2.0 ** -qc / (qc + 1.0) * geom


def i3_quadrature(levels: LevelRange, q: float, oversample: int = 6) -> float:
    """Gauss quadrature of int ||Z||_{q',w}^{q'} dt (not exact: fractional
    powers have unbounded curvature at their kinks; oversample accordingly)."""
    qc = q / (q - 1.0)
    nodes, gw = dyadic_gauss_nodes(levels.k1 + 1, oversample)
    zs = z_values_by_level(levels, nodes)
    ks = np.arange(levels.k0, levels.k1 + 1)
    vals = np.sum(np.abs(zs) ** qc * np.ldexp(1.0, -ks[:, None]), axis=0)
    return float(np.dot(gw, vals))


def projected_isotropy(V: Subspace, levels: LevelRange | None = None) -> float:
    """int ||Pi_V Z(t)||_{2,w}^2 dt; equals dim V for orthonormal V."""
    if levels is None:
        levels = V.levels
    elif levels != V.levels:
        raise ShapeError("subspace range does not match requested range")
    dev = V.gram_deviation()
    if dev > ISOTROPY_GRAM_TOL:
        raise ParameterError(
            f"basis is not orthonormal (Gram deviation {dev:.3e} > {ISOTROPY_GRAM_TOL})"
        )
    nodes, gw = dyadic_gauss_nodes(levels.k1 + 1)
    total = 0.0
    chunk = 4096
    for s in range(0, nodes.size, chunk):
        seg = slice(s, min(nodes.size, s + chunk))
        b = basis_profile_inner(V, nodes[seg], "z")
        total += float(np.dot(gw[seg], np.sum(b * b, axis=0)))
    return total


def holder_lower_bound(I1: float, I2: float, I3: float, q: float) -> float:
    """max(0, (I1 - I2) / I3^{1/q'}): a lower bound on the q-average error."""
    if I3 <= 0.0:
        raise ParameterError(f"I3 must be positive, got {I3}")
    return max(0.0, holder_raw_bound(I1, I2, I3, q))


def holder_raw_bound(I1: float, I2: float, I3: float, q: float) -> float:
    qc = q / (q - 1.0)
    return (I1 - I2) / I3 ** (1.0 / qc)


@dataclass(frozen=True)
class CertificateReport:
    """Everything one certification run measures."""

    n: int
    q: float
    gamma: float
    delta: float
    levels: LevelRange
    dim: int
    rule: str
    I1: float
    I2: float
    I3: float
    holder_lb: float
    holder_raw: float
    l2_avg_err: float
    lqw_avg_err: float
    sup_q: float
    l2_threshold: float
    lq_threshold: float
    dichotomy: str  # "l2low" | "lqlow" | "both" | "neither"
    outside_hypotheses: bool
    l2_is_lower_estimate: bool
    eta_l2_avg_err: float
    quad_level: int

    @property
    def l2low_holds(self) -> bool:
        return self.dichotomy in ("l2low", "both")

    @property
    def lqlow_holds(self) -> bool:
        return self.dichotomy in ("lqlow", "both")


def _dichotomy_verdict(l2_holds: bool, lq_holds: bool) -> str:
    if l2_holds and lq_holds:
        return "both"
    if l2_holds:
        return "l2low"
    if lq_holds:
        return "lqlow"
    return "neither"


def certify_subspace(
    V: Subspace,
    cfg: CertificateConfig,
    H_rule="best_l2",
    oversample: int | None = None,
) -> CertificateReport:
    """Evaluate the certificate and the dichotomy for one subspace.

    The l2 branch compares the coefficient-space average error (a lower
    estimate of the L2 error) against delta * n^{-1/2} * ln n; the lq branch
    compares the computed q-average weighted error against n^{-gamma}.
    dim V > n is reported as outside_hypotheses rather than an error.
    A 'neither' verdict falsifies the (delta, gamma, n) calibration, not the
    code.
    """
    levels = level_range(cfg.n, cfg.gamma, cfg.q)
    if V.levels != levels:
        raise ShapeError(
            f"subspace range {V.levels} does not match config range {levels}"
        )
    family = RULES[H_rule](V, cfg.q) if isinstance(H_rule, str) else H_rule(V)
    if family.subspace is not V:
        raise ShapeError("approximant rule must build on the given subspace")

    if oversample is None:
        oversample = 0 if family.linear_in_t else DEFAULT_OVERSAMPLE
    nodes, gw = dyadic_gauss_nodes(levels.k1 + 1, oversample)

    I1 = compute_I1(levels)
    I2 = compute_I2(family, levels, oversample=oversample)
    I3 = compute_I3(levels, cfg.q)
    raw = holder_raw_bound(I1, I2, I3, cfg.q)
    lb = max(0.0, raw)

    err2 = residual_2_powers(family, nodes)
    xnrm = x_norm_sq(levels, nodes)
    avg_2 = math.sqrt(max(0.0, float(np.dot(gw, err2))))
    # exact L2 error of the Haar-range realization of the approximant:
    # ||chi_t - eta_t||^2 = 1 - ||X||_w^2 + ||X - H||_w^2 (diagnostic only)
    eta_l2 = math.sqrt(max(0.0, float(np.dot(gw, 1.0 - xnrm + err2))))
    avg_q = float(np.dot(gw, residual_q_powers(family, nodes, cfg.q))) ** (1.0 / cfg.q)
    grid = sup_grid(levels)
    sup_q = float(np.max(residual_q_powers(family, grid, cfg.q))) ** (1.0 / cfg.q)

    verdict = _dichotomy_verdict(
        avg_2 >= cfg.l2_threshold, avg_q >= cfg.lq_threshold
    )
    return CertificateReport(
        n=cfg.n,
        q=cfg.q,
        gamma=cfg.gamma,
        delta=cfg.delta,
        levels=levels,
        dim=V.dim,
        rule=family.rule,
        I1=I1,
        I2=I2,
        I3=I3,
        holder_lb=lb,
        holder_raw=raw,
        l2_avg_err=avg_2,
        lqw_avg_err=avg_q,
        sup_q=sup_q,
        l2_threshold=cfg.l2_threshold,
        lq_threshold=cfg.lq_threshold,
        dichotomy=verdict,
        outside_hypotheses=V.dim > cfg.n,
        l2_is_lower_estimate=True,
        eta_l2_avg_err=eta_l2,
        quad_level=levels.k1 + 1 + oversample,
    )


def dichotomy_holds(report: CertificateReport, delta: float) -> bool:
    """Would the report satisfy a branch if delta were this value?"""
    unit = report.n ** -0.5 * math.log(report.n)
    return report.l2_avg_err >= delta * unit or report.lqw_avg_err >= report.lq_threshold


def calibrate_delta(
    reports: list[CertificateReport],
    hi: float = 1.0,
    iters: int = 60,
) -> float:
    """Largest delta for which every report satisfies a dichotomy branch.

    Bisection on [0, hi]; the battery property is monotone in delta (the l2
    branch only gets harder).  Returns 0.0 when even arbitrarily small
    positive delta fails, which falsifies the battery, not the code.
    """
    if not reports:
        raise ParameterError("need at least one report to calibrate")

    def feasible(delta: float) -> bool:
        return all(dichotomy_holds(r, delta) for r in reports)

    if not feasible(0.0):
        return 0.0
    lo = 0.0
    if feasible(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def smallest_conforming_n(reports: list[CertificateReport], delta: float) -> int | None:
    """Smallest n such that every report with that or larger n conforms."""
    by_n: dict[int, bool] = {}
    for r in reports:
        ok = dichotomy_holds(r, delta)
        by_n[r.n] = by_n.get(r.n, True) and ok
    ns = sorted(by_n)
    smallest = None
    for n in reversed(ns):
        if by_n[n]:
            smallest = n
        else:
            break
    return smallest

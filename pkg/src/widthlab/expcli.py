"""Command-line front end: identity verification, certification runs,
n-scans with CSV output, and scaling-law fits.

Subcommands: verify, certify, scan, fit.  Results CSV carries the schema tag
``widthlab-v1`` on its first line; floats are serialized with 17 significant
digits so reruns with the same seed and config are byte-identical.

Exit codes: 0 success, 1 identity/assertion failure, 2 configuration error,
3 capacity/regime refusal.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import approximants, certificate, oracle, step_profiles
from .approximants import (
    Subspace,
    family_haar_truncation,
    family_random,
    family_uniform_spline,
    matrix_profile_inner,
    orthonormalize,
    x_norm_sq,
)
from .certificate import CertificateConfig, certify_subspace, level_range
from .errors import CapacityError, ConfigError, LemmaRegimeError, ParameterError
from .haar_core import (
    CoefVector,
    DyadicIndex,
    LevelRange,
    PiecewisePolynomial,
    dyadic_gauss_nodes,
    haar_coefficients,
    integrate_exact,
)
from .step_profiles import z_gram, z_moments, z_profile_values, z_value_matrix

SCHEMA_TAG = "widthlab-v1"
VERIFY_SCHEMA_TAG = "widthlab-verify-v1"
VERIFY_K1_CAP = 12

CSV_COLUMNS = [
    "n", "q", "gamma", "delta", "family", "rule", "dim", "k0", "k1", "seed",
    "oversample", "sup_q", "avg_q", "avg_2", "holder_lb", "holder_raw",
    "I1", "I2", "I3", "l2_threshold", "lq_threshold", "dichotomy", "status",
    "wall_time_ms",
]

FAMILIES = ("haar_truncation", "uniform_spline", "random", "full")
RULES = ("best_l2", "zero", "best_lq")
FIT_COLUMNS = ("sup_q", "avg_q", "avg_2", "holder_lb")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# scan / certify rows


@dataclass
class ScanRow:
    n: int
    q: float
    gamma: float
    delta: float
    family: str
    rule: str
    seed: int
    oversample: int | None = None
    dim: int | None = None
    k0: int | None = None
    k1: int | None = None
    sup_q: float | None = None
    avg_q: float | None = None
    avg_2: float | None = None
    holder_lb: float | None = None
    holder_raw: float | None = None
    I1: float | None = None
    I2: float | None = None
    I3: float | None = None
    l2_threshold: float | None = None
    lq_threshold: float | None = None
    dichotomy: str = ""
    status: str = "ok"
    wall_time_ms: int = 0

    def to_fields(self) -> list[str]:
        vals = [self.n, self.q, self.gamma, self.delta, self.family, self.rule,
                self.dim, self.k0, self.k1, self.seed, self.oversample,
                self.sup_q, self.avg_q, self.avg_2, self.holder_lb,
                self.holder_raw, self.I1, self.I2, self.I3, self.l2_threshold,
                self.lq_threshold, self.dichotomy, self.status,
                self.wall_time_ms]
        return [_fmt(v) for v in vals]


def build_family(name: str, n: int, levels: LevelRange, seed: int) -> Subspace:
    if name == "haar_truncation":
        return family_haar_truncation(n, levels)
    if name == "uniform_spline":
        return family_uniform_spline(n, levels)
    if name == "random":
        return family_random(n, levels, [seed, n])
    if name == "full":
        return family_haar_truncation(levels.size, levels)
    raise ConfigError(f"unknown family {name!r} (choose from {FAMILIES})")


def run_row(n: int, family: str, rc) -> ScanRow:
    row = ScanRow(n=n, q=rc.q, gamma=rc.gamma, delta=rc.delta, family=family,
                  rule=rc.rule, seed=rc.seed, oversample=rc.oversample)
    t0 = time.perf_counter()
    try:
        levels = level_range(n, rc.gamma, rc.q)
        V = build_family(family, n, levels, rc.seed)
        cfg = CertificateConfig(n=n, q=rc.q, gamma=rc.gamma, delta=rc.delta)
        rep = certify_subspace(V, cfg, rc.rule, oversample=rc.oversample)
    except (LemmaRegimeError, CapacityError, ParameterError) as exc:
        row.status = f"skipped: {exc}"
        return row
    row.dim = rep.dim
    row.k0, row.k1 = rep.levels.k0, rep.levels.k1
    row.sup_q, row.avg_q, row.avg_2 = rep.sup_q, rep.lqw_avg_err, rep.l2_avg_err
    row.holder_lb, row.holder_raw = rep.holder_lb, rep.holder_raw
    row.I1, row.I2, row.I3 = rep.I1, rep.I2, rep.I3
    row.l2_threshold, row.lq_threshold = rep.l2_threshold, rep.lq_threshold
    row.dichotomy = rep.dichotomy
    row.status = "outside-hypotheses" if rep.outside_hypotheses else "ok"
    if rc.timing:
        row.wall_time_ms = int(round(1000.0 * (time.perf_counter() - t0)))
    return row


def _workers() -> int:
    env = os.environ.get("WIDTHLAB_WORKERS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"WIDTHLAB_WORKERS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def assert_row_invariants(rows: list[ScanRow]) -> None:
    """Hard pre-write check: the certified bound never exceeds the q-average."""
    for row in rows:
        if row.status in ("ok", "outside-hypotheses") and row.holder_lb is not None:
            if row.holder_lb > row.avg_q:
                raise AssertionError(
                    f"holder_lb {row.holder_lb!r} exceeds avg_q {row.avg_q!r} "
                    f"at n={row.n} family={row.family}"
                )


def compute_rows(rc) -> list[ScanRow]:
    jobs = [(n, fam) for n in rc.n_list for fam in rc.families]
    if not jobs:
        return []
    with ThreadPoolExecutor(max_workers=min(_workers(), len(jobs))) as pool:
        rows = list(pool.map(lambda nf: run_row(nf[0], nf[1], rc), jobs))
    assert_row_invariants(rows)
    return rows


def rows_to_csv(rows: list[ScanRow]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_TAG}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.to_fields())
    return buf.getvalue()


def read_rows_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if SCHEMA_TAG not in first:
            raise ConfigError(f"{path} does not carry the {SCHEMA_TAG} schema tag")
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# verify suites


@dataclass
class SuiteResult:
    name: str
    passed: bool
    max_dev: float
    tol: float
    note: str = ""


def _suite(name, tol, dev, note="") -> SuiteResult:
    return SuiteResult(name=name, passed=bool(dev <= tol), max_dev=float(dev),
                       tol=tol, note=note)


def _all_indices(k1: int) -> list[DyadicIndex]:
    return [DyadicIndex(k, j) for k in range(k1 + 1) for j in range(1, (1 << k) + 1)]


def suite_gram_closed(k1: int) -> SuiteResult:
    """Gram matrix of the certificate family vs diag(2^k), all levels <= k1."""
    levels = LevelRange(0, k1)
    nodes, gw = dyadic_gauss_nodes(k1 + 1)
    zmat = z_value_matrix(levels, nodes)
    gram = (zmat * gw) @ zmat.T
    expect = np.diag(np.concatenate(
        [np.full(1 << k, float(1 << k)) for k in range(k1 + 1)]))
    return _suite("z_gram_closed_vs_quadrature", 1e-10,
                  np.max(np.abs(gram - expect)),
                  note=f"{levels.size}^2 index pairs")


def suite_gram_oracle(k1: int, seed: int, pairs: int = 40) -> SuiteResult:
    """Spot-check Gram entries against the independent grid oracle."""
    rng = np.random.default_rng([seed, 101])
    idxs = _all_indices(k1)
    dev = 0.0
    for _ in range(pairs):
        i1, i2 = idxs[rng.integers(len(idxs))], idxs[rng.integers(len(idxs))]
        est = oracle.grid_integral(
            lambda u: z_profile_values(i1, u) * z_profile_values(i2, u),
            resolution=k1 + 1)
        dev = max(dev, abs(est.value - z_gram(i1, i2)))
    return _suite("z_gram_vs_grid_oracle", 1e-10, dev, note=f"{pairs} random pairs")


def suite_moments(k1: int, seed: int, count: int = 200) -> SuiteResult:
    rng = np.random.default_rng([seed, 102])
    idxs = _all_indices(k1)
    dev = 0.0
    for _ in range(count):
        idx = idxs[rng.integers(len(idxs))]
        t0 = float(rng.uniform(-0.5, 1.5))
        m0, m1 = z_moments(idx, t0)
        dev = max(dev, abs(m0), abs(m1))
    return _suite("z_moments_vanish", 1e-10, dev, note=f"{count} random (idx, t0)")


def suite_xz_per_index(k1: int) -> SuiteResult:
    """int X_{k,j} Z_{k,j} dt = 1/sqrt(12) for every index, exactly."""
    from .step_profiles import x_profile_pp, z_profile_pp

    dev = 0.0
    for idx in _all_indices(k1):
        val = integrate_exact(x_profile_pp(idx) * z_profile_pp(idx))
        dev = max(dev, abs(val - 1.0 / step_profiles.A))
    return _suite("xz_product_integral", 1e-10, dev)


def suite_i1_ranges(k1_cap: int = 12) -> SuiteResult:
    dev = 0.0
    for k1 in range(k1_cap + 1):
        for k0 in range(k1 + 1):
            levels = LevelRange(k0, k1)
            dev = max(dev, abs(certificate.compute_I1(levels)
                               - certificate.i1_quadrature(levels)))
    return _suite("i1_closed_vs_quadrature", 1e-10, dev,
                  note=f"all ranges k1 <= {k1_cap}")


def suite_isotropy_units(k1: int) -> SuiteResult:
    levels = LevelRange(max(0, k1 - 3), k1)
    nodes, gw = dyadic_gauss_nodes(k1 + 1)
    eye = np.eye(levels.size)
    b = matrix_profile_inner(eye, levels, nodes, "z")
    got = (b * b) @ gw
    expect = levels.weights()
    return _suite("isotropy_coordinate_units", 1e-10,
                  np.max(np.abs(got - expect) / expect))


def suite_isotropy_random(k1: int, seed: int, count: int = 100) -> SuiteResult:
    levels = LevelRange(max(0, k1 - 3), k1)
    rng = np.random.default_rng([seed, 103])
    mat = rng.standard_normal((count, levels.size))
    nodes, gw = dyadic_gauss_nodes(k1 + 1)
    b = matrix_profile_inner(mat, levels, nodes, "z")
    got = (b * b) @ gw
    expect = (mat * levels.weights()) @ mat.T
    expect = np.diag(expect)
    return _suite("isotropy_random_vectors", 1e-8,
                  np.max(np.abs(got - expect) / expect), note=f"{count} vectors")


def suite_isotropy_projected(k1: int, seed: int) -> SuiteResult:
    levels = LevelRange(max(0, k1 - 4), k1)
    rng = np.random.default_rng([seed, 104])
    dev = 0.0
    dims = [d for d in (1, 4, 16, 64) if d <= levels.size]
    for dim in dims:
        V = orthonormalize(rng.standard_normal((dim, levels.size)), levels)
        got = certificate.projected_isotropy(V)
        dev = max(dev, abs(got - V.dim) / V.dim)
    return _suite("isotropy_projected_dims", 1e-6, dev, note=f"dims {dims}")


def _random_truncated_span(K: int, rng) -> tuple[PiecewisePolynomial, float, CoefVector]:
    """Random element of span{1, Haar levels 0..K} as an exact pp."""
    cells = 1 << (K + 1)
    mean = float(rng.uniform(-1.0, 1.0))
    vals = np.full(cells, mean)
    coefs = CoefVector(LevelRange(0, K), rng.uniform(-1.0, 1.0, (1 << (K + 1)) - 1))
    i = np.arange(cells)
    for k in range(K + 1):
        j = i >> (K + 1 - k)
        sign = np.where((i >> (K - k)) & 1, -1.0, 1.0)
        vals += coefs.level_block(k)[j] * sign
    edges = np.arange(cells + 1) / cells
    pp = PiecewisePolynomial.from_values(edges, vals)
    return pp, mean, coefs


def suite_parseval(k1: int, seed: int, count: int = 25) -> SuiteResult:
    """||f||_2^2 = (int f)^2 + sum_k 2^-k sum_j c_{k,j}(f)^2 on truncated spans."""
    K = min(6, k1)
    rng = np.random.default_rng([seed, 105])
    dev = 0.0
    for _ in range(count):
        pp, _, _ = _random_truncated_span(K, rng)
        lhs = integrate_exact(pp * pp)
        levels = LevelRange(0, K)
        coefs = haar_coefficients(pp, levels)
        rhs = integrate_exact(pp) ** 2 + float(
            np.dot(levels.weights(), coefs.data ** 2))
        dev = max(dev, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return _suite("parseval_truncated_span", 1e-12, dev, note=f"{count} random spans")


def suite_sup_x_norm(k1: int) -> SuiteResult:
    worst = -math.inf
    for b in range(k1 + 1):
        for a in range(b + 1):
            levels = LevelRange(a, b)
            grid = approximants.sup_grid(levels)
            excess = np.max(x_norm_sq(levels, grid)) - 2.0 ** (1 - a)
            worst = max(worst, excess)
    return _suite("sup_x_norm_bound", 0.0, max(0.0, worst),
                  note="max ||X(t)||^2_w - 2^(1-k0) over all ranges")


def suite_i3(k1: int) -> SuiteResult:
    dev = 0.0
    cap = min(k1, 6)
    for q in (2.5, 4.0):
        for b in range(cap + 1):
            for a in range(b + 1):
                levels = LevelRange(a, b)
                closed = certificate.compute_I3(levels, q)
                quad = certificate.i3_quadrature(levels, q, oversample=10)
                dev = max(dev, abs(closed - quad) / closed)
    return _suite("i3_closed_vs_quadrature", 1e-7, dev,
                  note=f"q in (2.5, 4), ranges k1 <= {cap}")


def run_verify_suites(k1: int, seed: int) -> list[SuiteResult]:
    if k1 > VERIFY_K1_CAP:
        raise CapacityError(
            f"verify is capped at k1 <= {VERIFY_K1_CAP} for exact suites, got {k1}")
    if k1 < 1:
        raise ConfigError("verify needs k1 >= 1")
    return [
        suite_gram_closed(k1),
        suite_gram_oracle(k1, seed),
        suite_moments(k1, seed),
        suite_xz_per_index(k1),
        suite_i1_ranges(),
        suite_isotropy_units(k1),
        suite_isotropy_random(k1, seed),
        suite_isotropy_projected(k1, seed),
        suite_parseval(k1, seed),
        suite_sup_x_norm(k1),
        suite_i3(k1),
    ]


# ---------------------------------------------------------------------------
# fit


@dataclass
class FitResult:
    c: float
    alpha: float
    beta: float
    residual_rms: float
    rows_used: int = 0
    column: str = ""


def fit_scaling(ns, errors, column: str = "") -> FitResult:
    """Least squares for log e = log c - alpha*log n + beta*log log n."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.size != errors.size or ns.size < 4:
        raise ConfigError("fit needs at least 4 rows")
    if np.unique(ns).size < 4:
        raise ConfigError("fit needs at least 4 distinct n (singular design)")
    if np.any(errors <= 0.0) or np.any(ns < 2):
        raise ConfigError("fit needs positive errors and n >= 2")
    ln = np.log(ns)
    design = np.vstack([np.ones_like(ln), -ln, np.log(ln)]).T
    y = np.log(errors)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return FitResult(c=float(math.exp(coef[0])), alpha=float(coef[1]),
                     beta=float(coef[2]),
                     residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                     rows_used=int(ns.size), column=column)


def fit_rows(rows: list[dict], column: str, family: str | None = None) -> FitResult:
    if column not in FIT_COLUMNS:
        raise ConfigError(f"unknown fit column {column!r} (choose from {FIT_COLUMNS})")
    ns, es = [], []
    for row in rows:
        if row.get("status") != "ok":
            continue
        if family and row.get("family") != family:
            continue
        val = row.get(column, "")
        if not val:
            continue
        e = float(val)
        if e > 0.0:
            ns.append(int(row["n"]))
            es.append(e)
    return fit_scaling(ns, es, column=column)


# ---------------------------------------------------------------------------
# SVG emitter (presentation only)

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(rows: list[ScanRow], column: str = "avg_2") -> str:
    """Log-log line chart of an error column against n, one line per family."""
    series: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        val = getattr(row, column, None)
        if row.status == "ok" and val is not None and val > 0.0:
            series.setdefault(row.family, []).append((row.n, val))
    width, height, margin = 640, 480, 56
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    pts = [p for pp in series.values() for p in pp]
    if pts:
        lx = [math.log10(n) for n, _ in pts]
        ly = [math.log10(e) for _, e in pts]
        x0, x1 = min(lx), max(lx)
        y0, y1 = min(ly), max(ly)
        x1 += (x1 - x0 or 1.0) * 0.05 + 1e-9
        x0 -= (x1 - x0) * 0.05
        y1 += (y1 - y0 or 1.0) * 0.05 + 1e-9
        y0 -= (y1 - y0) * 0.05

        def sx(v):
            return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

        def sy(v):
            return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

        parts.append(
            f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
            f'height="{height - 2 * margin}" fill="none" stroke="#888"/>')
        for i, (name, data) in enumerate(sorted(series.items())):
            color = _PALETTE[i % len(_PALETTE)]
            data = sorted(data)
            path = " ".join(
                f"{sx(math.log10(n)):.2f},{sy(math.log10(e)):.2f}" for n, e in data)
            parts.append(f'<polyline points="{path}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            for n, e in data:
                parts.append(f'<circle cx="{sx(math.log10(n)):.2f}" '
                             f'cy="{sy(math.log10(e)):.2f}" r="2.5" fill="{color}"/>')
            parts.append(f'<text x="{margin + 8}" y="{margin + 16 + 14 * i}" '
                         f'font-size="12" fill="{color}">{name}</text>')
        parts.append(f'<text x="{width // 2}" y="{height - 12}" font-size="12" '
                     f'text-anchor="middle">log10 n</text>')
        parts.append(f'<text x="16" y="{height // 2}" font-size="12" '
                     f'transform="rotate(-90 16 {height // 2})" '
                     f'text-anchor="middle">log10 {column}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# config file handling

_SECTION_KEYS = {
    "verify": {"k1": int, "seed": int, "out": str},
    "certify": {"q": float, "gamma": float, "delta": float, "n": int,
                "n_list": str, "family": str, "rule": str, "seed": int,
                "oversample": int, "out": str, "timing": bool},
    "scan": {"q": float, "gamma": float, "delta": float, "n": int,
             "n_list": str, "family": str, "rule": str, "seed": int,
             "oversample": int, "out": str, "timing": bool, "svg": str},
    "fit": {"column": str, "family": str, "out": str, "rows": str},
}


def load_config(path: str, command: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        known = _SECTION_KEYS[section]
        for key in parser[section]:
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    out: dict = {}
    if parser.has_section(command):
        for key, value in parser[command].items():
            typ = _SECTION_KEYS[command][key]
            try:
                if typ is bool:
                    out[key] = value.strip().lower() in ("1", "true", "yes", "on")
                else:
                    out[key] = typ(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return out


def _parse_n_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad n list {text!r}") from exc


@dataclass
class RunSettings:
    q: float = 4.0
    gamma: float = 0.3
    delta: float = certificate.DEFAULT_DELTA
    n_list: list[int] = field(default_factory=list)
    families: list[str] = field(default_factory=lambda: ["haar_truncation"])
    rule: str = "best_l2"
    seed: int = 0
    oversample: int | None = None
    timing: bool = False


def _merge_run_settings(args, command: str) -> RunSettings:
    conf = load_config(args.config, command) if args.config else {}

    def pick(flag, key, default):
        val = getattr(args, flag, None)
        if val is not None:
            return val
        return conf.get(key, default)

    rc = RunSettings()
    rc.q = float(pick("q", "q", rc.q))
    rc.gamma = float(pick("gamma", "gamma", rc.gamma))
    rc.delta = float(pick("delta", "delta", rc.delta))
    rc.rule = str(pick("rule", "rule", rc.rule))
    rc.seed = int(pick("seed", "seed", rc.seed))
    rc.timing = bool(pick("timing", "timing", rc.timing))
    over = pick("oversample", "oversample", None)
    rc.oversample = None if over is None else int(over)

    n_single = pick("n", "n", None)
    n_list_text = pick("n_list", "n_list", None)
    if n_single is not None and n_list_text is not None:
        raise ConfigError("give either n or n-list, not both")
    if n_list_text is not None:
        rc.n_list = _parse_n_list(str(n_list_text))
    elif n_single is not None:
        rc.n_list = [int(n_single)]
    else:
        raise ConfigError(f"{command} needs n or n-list")

    fam_text = str(pick("family", "family", "haar_truncation"))
    rc.families = [f.strip() for f in fam_text.split(",") if f.strip()]
    for fam in rc.families:
        if fam not in FAMILIES:
            raise ConfigError(f"unknown family {fam!r} (choose from {FAMILIES})")
    if rc.rule not in RULES:
        raise ConfigError(f"unknown rule {rc.rule!r} (choose from {RULES})")
    if not 2.0 < rc.q:
        raise ConfigError(f"q must exceed 2, got {rc.q}")
    if rc.gamma <= 0.0:
        raise ConfigError(f"gamma must be positive, got {rc.gamma}")
    # scans target the theorem regime; certify lets bad per-row regimes
    # surface as skipped rows instead
    if command == "scan" and not 1.0 / rc.q < rc.gamma < 0.5:
        raise ConfigError(f"scan requires gamma in (1/q, 1/2), got {rc.gamma}")
    if rc.delta <= 0.0:
        raise ConfigError(f"delta must be positive, got {rc.delta}")
    if rc.oversample is not None and rc.oversample < 0:
        raise ConfigError("oversample must be >= 0")
    return rc


def _resolve_out(args, command: str) -> str | None:
    if getattr(args, "out", None) is not None:
        return args.out
    if args.config:
        return load_config(args.config, command).get("out")
    return None


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    conf = load_config(args.config, "verify") if args.config else {}
    k1 = args.k1 if args.k1 is not None else int(conf.get("k1", 7))
    seed = args.seed if args.seed is not None else int(conf.get("seed", 0))
    suites = run_verify_suites(k1, seed)
    for s in suites:
        status = "PASS" if s.passed else "FAIL"
        note = f"  ({s.note})" if s.note else ""
        print(f"[{status}] {s.name}: max_dev={s.max_dev:.3e} tol={s.tol:.1e}{note}")
    all_passed = all(s.passed for s in suites)
    out = _resolve_out(args, "verify")
    if out:
        payload = {
            "schema": VERIFY_SCHEMA_TAG,
            "k1": k1,
            "seed": seed,
            "all_passed": all_passed,
            "suites": [vars(s) for s in suites],
        }
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print("verify:", "all identities hold" if all_passed else "IDENTITY FAILURE")
    return 0 if all_passed else 1


def _emit_rows(args, rows: list[ScanRow], command: str) -> int:
    text = rows_to_csv(rows)
    out = _resolve_out(args, command)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        ok = sum(1 for r in rows if r.status == "ok")
        print(f"{command}: wrote {len(rows)} rows ({ok} ok) to {out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_certify(args) -> int:
    rc = _merge_run_settings(args, "certify")
    rows = compute_rows(rc)
    return _emit_rows(args, rows, "certify")


def cmd_scan(args) -> int:
    rc = _merge_run_settings(args, "scan")
    if rc.n_list != sorted(rc.n_list):
        raise ConfigError("scan schedule must be sorted ascending")
    rows = compute_rows(rc)
    svg = args.svg if args.svg is not None else (
        load_config(args.config, "scan").get("svg") if args.config else None)
    if svg:
        with open(svg, "w", encoding="utf-8") as fh:
            fh.write(render_svg(rows))
    return _emit_rows(args, rows, "scan")


def cmd_fit(args) -> int:
    conf = load_config(args.config, "fit") if args.config else {}
    rows_path = args.rows if args.rows is not None else conf.get("rows")
    if not rows_path:
        raise ConfigError("fit needs a rows CSV path")
    column = args.column if args.column is not None else conf.get("column", "avg_2")
    family = args.family if args.family is not None else conf.get("family")
    rows = read_rows_csv(rows_path)
    result = fit_rows(rows, column, family)
    print(f"fit[{result.column}]: c={result.c:.6g} alpha={result.alpha:.6g} "
          f"beta={result.beta:.6g} residual_rms={result.residual_rms:.6g} "
          f"rows={result.rows_used}")
    out = _resolve_out(args, "fit")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(vars(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widthlab",
        description="Haar-coefficient certificates for subspace approximation "
                    "lower bounds: identity checks, certification, n-scans, fits.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file; CLI flags override it")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output path")

    p_verify = sub.add_parser("verify", help="run the identity suites")
    common(p_verify)
    p_verify.add_argument("--k1", type=int, default=None,
                          help=f"finest level for exact suites (cap {VERIFY_K1_CAP})")
    p_verify.set_defaults(func=cmd_verify)

    def run_flags(p):
        common(p)
        p.add_argument("--q", type=float, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--n-list", dest="n_list", default=None,
                       help="comma-separated n schedule")
        p.add_argument("--family", default=None,
                       help=f"comma-separated families from {FAMILIES}")
        p.add_argument("--rule", default=None, help=f"approximant rule {RULES}")
        p.add_argument("--oversample", type=int, default=None)
        p.add_argument("--timing", action="store_const", const=True, default=None,
                       help="record wall times (breaks byte-identical output)")

    p_certify = sub.add_parser("certify", help="certificate rows as CSV")
    run_flags(p_certify)
    p_certify.set_defaults(func=cmd_certify)

    p_scan = sub.add_parser("scan", help="error scan over an n schedule")
    run_flags(p_scan)
    p_scan.add_argument("--svg", default=None, help="also draw a log-log chart")
    p_scan.set_defaults(func=cmd_scan)

    p_fit = sub.add_parser("fit", help="fit c * n^-alpha * (log n)^beta")
    common(p_fit)
    p_fit.add_argument("rows", nargs="?", default=None, help="scan/certify CSV")
    p_fit.add_argument("--column", default=None,
                       help=f"error column, one of {FIT_COLUMNS}")
    p_fit.add_argument("--family", default=None, help="restrict to one family")
    p_fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (CapacityError, LemmaRegimeError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

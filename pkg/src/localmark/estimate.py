"""Kernel estimators for local and global mark correlation curves.

All estimators share one scheme: at each grid distance r, pair scores are
averaged with kernel weights K(d_ij - r).  The planar 1/(2*pi*r*|W|)
prefactors cancel between numerator and denominator and are omitted; the
network estimator is already a plain weighted average.  Grid cells whose
weight sum falls below ``min_weight`` are flagged invalid, never zeroed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .exceptions import DegenerateStatisticError, InputDataError
from .pattern import FunctionalMarks, MarkedPointPattern
from .testfuncs import (
    ZERO_MEAN_KINDS,
    TestFunctionSpec,
    global_normalizer,
    local_normalizer,
    pair_score,
)
from .testfuncs import MarkContext

KERNELS = ("epanechnikov", "gaussian", "box")

#: Stoyan's practitioner rule for the smoothing bandwidth: 0.15 / sqrt(intensity)
STOYAN_BANDWIDTH_FACTOR = 0.15


@dataclass(frozen=True)
class EstimationConfig:
    r_grid: np.ndarray
    bandwidth: float
    kernel: str = "epanechnikov"
    min_weight: float = 1e-10

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        if r.ndim != 1 or len(r) == 0 or np.any(r < 0) or np.any(np.diff(r) <= 0):
            raise InputDataError("r-grid must be increasing and nonnegative")
        if not (self.bandwidth > 0):
            raise InputDataError("bandwidth must be positive")
        if self.kernel not in KERNELS:
            raise InputDataError(f"kernel must be one of {', '.join(KERNELS)}")
        object.__setattr__(self, "r_grid", r)


def stoyan_bandwidth(intensity: float) -> float:
    return STOYAN_BANDWIDTH_FACTOR / np.sqrt(intensity)


def make_config(pattern: MarkedPointPattern, r_max: float | None = None,
                r_steps: int = 512, kernel: str = "epanechnikov",
                bandwidth: float | None = None) -> EstimationConfig:
    """Config with the package defaults filled from the pattern.

    r_max defaults to a quarter of the shorter side of the window (planar)
    or of the network's bounding box; bandwidth defaults to Stoyan's rule.
    """
    if r_max is None:
        if pattern.is_network:
            span = pattern.network.nodes.max(axis=0) - pattern.network.nodes.min(axis=0)
            r_max = 0.25 * float(span.min()) if span.min() > 0 else 0.25 * float(span.max())
        else:
            r_max = 0.25 * pattern.window.shorter_side()
    if bandwidth is None:
        bandwidth = stoyan_bandwidth(pattern.intensity())
    r_grid = np.linspace(0.0, float(r_max), int(r_steps) + 1)[1:]
    return EstimationConfig(r_grid=r_grid, bandwidth=float(bandwidth), kernel=kernel)


@dataclass
class SummaryCurve:
    r_grid: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)


@dataclass
class PointwiseSurface:
    r_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray  # (len(r_grid), len(t_grid))
    valid: np.ndarray  # per r row
    meta: dict[str, Any] = field(default_factory=dict)


def kernel_weight(kernel: str, u, h: float):
    """Kernel density value at signed distance u with bandwidth h."""
    if not h > 0:
        raise InputDataError("bandwidth must be positive")
    u = np.asarray(u, dtype=float)
    if kernel == "epanechnikov":
        z = u / h
        return np.where(np.abs(z) <= 1.0, 0.75 / h * np.clip(1.0 - z * z, 0.0, None), 0.0)
    if kernel == "gaussian":
        z = u / h
        return np.exp(-0.5 * z * z) / (h * np.sqrt(2.0 * np.pi))
    if kernel == "box":
        return np.where(np.abs(u) <= h, 0.5 / h, 0.0)
    raise InputDataError(f"unknown kernel {kernel!r}")


def _weight_matrix(d_j: np.ndarray, cfg: EstimationConfig) -> np.ndarray:
    """(len(r_grid), len(d_j)) kernel weights; infinite distances get 0."""
    finite = np.isfinite(d_j)
    u = np.where(finite, d_j, 0.0)[None, :] - cfg.r_grid[:, None]
    w = kernel_weight(cfg.kernel, u, cfg.bandwidth)
    return np.where(finite[None, :], w, 0.0)


def _row_sums(w: np.ndarray) -> np.ndarray:
    # matmul so the accumulation order matches the numerators' w @ marks;
    # this makes constant marks cancel exactly in the ratio
    return w @ np.ones(w.shape[1])


def _real_values(pattern: MarkedPointPattern) -> np.ndarray:
    if pattern.is_functional:
        raise InputDataError("pattern has functional marks; use the functional path")
    return pattern.marks.values


def _distances(pattern, distances):
    d = pattern.pairwise_distances() if distances is None else np.asarray(distances, float)
    if d.shape != (pattern.n_points, pattern.n_points):
        raise InputDataError("distance matrix shape does not match the pattern")
    return d


def _check_index(pattern, i):
    if not (0 <= i < pattern.n_points):
        raise InputDataError(f"point index {i} out of range (n={pattern.n_points})")


def _local_num_den(w: np.ndarray, kind: str, m_i: float, m_j: np.ndarray,
                   mu_j: float, min_weight: float):
    """Numerator and denominator sums on the r-grid for one point."""
    den = _row_sums(w)
    if kind == "schlather":
        s1 = w @ m_j
        with np.errstate(invalid="ignore", divide="ignore"):
            mu_r = np.where(den > 0, s1 / np.where(den > 0, den, 1.0), 0.0)
        num = m_i * (s1 - mu_r * den)
    else:
        num = w @ pair_score(kind, m_i, m_j, mu_j=mu_j)
    return num, den


def _leave_one_out(values: np.ndarray, i: int):
    m_j = np.delete(values, i)
    if len(m_j) < 1:
        raise InputDataError("pattern needs at least 2 points")
    mu_j = float(m_j.mean())
    sigma2_j = float(m_j.var(ddof=1)) if len(m_j) >= 2 else 0.0
    return m_j, mu_j, sigma2_j


def local_c(pattern: MarkedPointPattern, i: int, spec: TestFunctionSpec,
            cfg: EstimationConfig, distances=None) -> SummaryCurve:
    """Kernel-weighted mean of the test function around point i (unnormalized)."""
    _check_index(pattern, i)
    values = _real_values(pattern)
    d = _distances(pattern, distances)
    m_j, mu_j, _ = _leave_one_out(values, i)
    w = _weight_matrix(np.delete(d[i], i), cfg)
    num, den = _local_num_den(w, spec.kind, float(values[i]), m_j, mu_j, cfg.min_weight)
    valid = den >= cfg.min_weight
    out = np.full_like(num, np.nan)
    out[valid] = num[valid] / den[valid]
    return SummaryCurve(cfg.r_grid, out, valid, meta={
        "testfn": spec.kind, "point": i, "kernel": cfg.kernel,
        "bandwidth": cfg.bandwidth, "normalizer": None})


def _resolve_normalizer(kind: str, raw: float, sigma2: float) -> tuple[float, bool]:
    if kind in ZERO_MEAN_KINDS:
        if sigma2 == 0.0:
            raise DegenerateStatisticError(
                f"{kind}: variance fallback normalizer is zero")
        return sigma2, True
    if raw == 0.0:
        raise DegenerateStatisticError(f"{kind}: normalizer is zero, curve undefined")
    return raw, False


def local_kappa(pattern: MarkedPointPattern, i: int, spec: TestFunctionSpec,
                cfg: EstimationConfig, distances=None) -> SummaryCurve:
    """Local mark correlation curve for point i (no-association baseline 1)."""
    curve = local_c(pattern, i, spec, cfg, distances=distances)
    values = _real_values(pattern)
    m_j, mu_j, sigma2_j = _leave_one_out(values, i)
    ctx = MarkContext(mu_j=mu_j, sigma2_j=sigma2_j)
    raw = local_normalizer(spec, float(values[i]), ctx, marks_j=m_j)
    norm, fallback = _resolve_normalizer(spec.kind, raw, sigma2_j)
    curve.values = curve.values / norm
    curve.meta["normalizer"] = norm
    curve.meta["variance_normalized"] = fallback
    return curve


def local_kappa_network(pattern: MarkedPointPattern, i: int, spec: TestFunctionSpec,
                        cfg: EstimationConfig, distances=None) -> SummaryCurve:
    """Network-distance variant; the pattern must live on a linear network."""
    if not pattern.is_network and distances is None:
        raise InputDataError("pattern is not on a network")
    return local_kappa(pattern, i, spec, cfg, distances=distances)


def global_sums(pattern: MarkedPointPattern, spec: TestFunctionSpec,
                cfg: EstimationConfig, distances=None):
    """Ordered-pair numerator and denominator sums (sum of the local sums)."""
    values = _real_values(pattern)
    d = _distances(pattern, distances)
    n = pattern.n_points
    if n < 2:
        raise InputDataError("global estimation needs at least 2 points")
    num = np.zeros(len(cfg.r_grid))
    den = np.zeros(len(cfg.r_grid))
    for i in range(n):
        m_j, mu_j, _ = _leave_one_out(values, i)
        w = _weight_matrix(np.delete(d[i], i), cfg)
        num_i, den_i = _local_num_den(w, spec.kind, float(values[i]), m_j,
                                      mu_j, cfg.min_weight)
        num += num_i
        den += den_i
    return num, den


def global_kappa(pattern: MarkedPointPattern, spec: TestFunctionSpec,
                 cfg: EstimationConfig, distances=None) -> SummaryCurve:
    """Global mark correlation curve over all ordered pairs."""
    if pattern.is_functional:
        return global_kappa_functional(pattern, spec, cfg, distances=distances)
    num, den = global_sums(pattern, spec, cfg, distances=distances)
    values = _real_values(pattern)
    raw = global_normalizer(spec, values)
    norm, fallback = _resolve_normalizer(spec.kind, raw, float(values.var(ddof=1)))
    valid = den >= cfg.min_weight
    out = np.full_like(num, np.nan)
    out[valid] = num[valid] / den[valid] / norm
    return SummaryCurve(cfg.r_grid, out, valid, meta={
        "testfn": spec.kind, "point": "global", "kernel": cfg.kernel,
        "bandwidth": cfg.bandwidth, "normalizer": norm,
        "variance_normalized": fallback})


# ---------------------------------------------------------------------------
# functional marks

def _functional_marks(pattern) -> FunctionalMarks:
    if not pattern.is_functional:
        raise InputDataError("pattern has real marks; use the real-mark path")
    return pattern.marks


def _pointwise_num_den(w: np.ndarray, kind: str, f_i: np.ndarray, f_j: np.ndarray):
    """Numerator (r x t) and denominator (r,) sums for curve-valued marks."""
    den = _row_sums(w)
    if kind == "schlather":
        s1 = w @ f_j  # (r, t)
        with np.errstate(invalid="ignore", divide="ignore"):
            mu_rt = np.where(den[:, None] > 0, s1 / np.where(den[:, None] > 0,
                                                             den[:, None], 1.0), 0.0)
        num = f_i[None, :] * (s1 - mu_rt * den[:, None])
    else:
        mu_j = f_j.mean(axis=0)
        num = w @ pair_score(kind, f_i, f_j, mu_j=mu_j)
    return num, den


def pointwise_local_c_functional(pattern: MarkedPointPattern, i: int,
                                 spec: TestFunctionSpec, cfg: EstimationConfig,
                                 distances=None) -> PointwiseSurface:
    """Unnormalized local surface c(r, t) for curve-valued marks."""
    _check_index(pattern, i)
    marks = _functional_marks(pattern)
    d = _distances(pattern, distances)
    f_j = np.delete(marks.curves, i, axis=0)
    if len(f_j) < 1:
        raise InputDataError("pattern needs at least 2 points")
    w = _weight_matrix(np.delete(d[i], i), cfg)
    num, den = _pointwise_num_den(w, spec.kind, marks.curves[i], f_j)
    valid = den >= cfg.min_weight
    out = np.full_like(num, np.nan)
    out[valid] = num[valid] / den[valid, None]
    return PointwiseSurface(cfg.r_grid, marks.t_grid, out, valid, meta={
        "testfn": spec.kind, "point": i, "kernel": cfg.kernel,
        "bandwidth": cfg.bandwidth})


def integrate_over_t(surface: PointwiseSurface) -> SummaryCurve:
    """Trapezoidal integral of a surface along its t-grid, row by row."""
    if len(surface.t_grid) < 2:
        raise InputDataError("t-integration needs at least 2 samples")
    vals = np.trapezoid(surface.values, surface.t_grid, axis=1)
    vals = np.where(surface.valid, vals, np.nan)
    return SummaryCurve(surface.r_grid, vals, surface.valid.copy(),
                        meta=dict(surface.meta))


def _trapz_weights(t_grid: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t_grid)
    dt = np.diff(t_grid)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _pointwise_local_normalizers(kind: str, f_i: np.ndarray, f_j: np.ndarray):
    """Per-t normalizer plus per-t variance fallback for curve marks."""
    mu = f_j.mean(axis=0)
    sigma2 = f_j.var(axis=0, ddof=1) if len(f_j) >= 2 else np.zeros_like(mu)
    if kind == "stoyan":
        raw = f_i * mu
    elif kind == "beisbart":
        raw = f_i + mu
    elif kind in ZERO_MEAN_KINDS:
        raw = np.zeros_like(mu)
    elif kind == "r_mark_bullet":
        raw = mu.copy()
    elif kind == "r_mark_dot":
        raw = f_i.astype(float).copy()
    elif kind == "variogram":
        raw = 0.5 * ((f_i - mu) ** 2 + sigma2)
    elif kind == "differentiation":
        raw = pair_score(kind, f_i, f_j).mean(axis=0)
    else:
        raise InputDataError(f"unknown test function {kind!r}")
    return raw, sigma2


def _kappa_from_surface(surface: PointwiseSurface, raw: np.ndarray,
                        sigma2: np.ndarray, kind: str) -> SummaryCurve:
    """Divide a c(r, t) surface by per-t normalizers and integrate over t."""
    if kind in ZERO_MEAN_KINDS:
        norms, fallback = sigma2, True
    else:
        norms, fallback = raw, False
    usable = norms != 0.0
    if not np.any(usable):
        raise DegenerateStatisticError(
            f"{kind}: pointwise normalizer is zero on the whole t-grid")
    if not np.all(usable):
        warnings.warn(
            f"{kind}: zero pointwise normalizer at {int((~usable).sum())} t-sample(s);"
            " integrating over the remaining grid with renormalized weights",
            RuntimeWarning, stacklevel=3)
    w_t = _trapz_weights(surface.t_grid)
    scale = w_t.sum() / w_t[usable].sum()
    ratio = surface.values[:, usable] / norms[usable][None, :]
    vals = scale * (ratio @ w_t[usable])
    vals = np.where(surface.valid, vals, np.nan)
    meta = dict(surface.meta)
    meta["variance_normalized"] = fallback
    return SummaryCurve(surface.r_grid, vals, surface.valid.copy(), meta=meta)


def local_kappa_functional(pattern: MarkedPointPattern, i: int,
                           spec: TestFunctionSpec, cfg: EstimationConfig,
                           distances=None) -> SummaryCurve:
    """t-integrated local correlation curve for curve-valued marks."""
    surface = pointwise_local_c_functional(pattern, i, spec, cfg, distances=distances)
    marks = _functional_marks(pattern)
    f_j = np.delete(marks.curves, i, axis=0)
    raw, sigma2 = _pointwise_local_normalizers(spec.kind, marks.curves[i], f_j)
    return _kappa_from_surface(surface, raw, sigma2, spec.kind)


def _pointwise_global_normalizers(kind: str, curves: np.ndarray):
    mu = curves.mean(axis=0)
    sigma2 = curves.var(axis=0, ddof=1)
    if kind == "stoyan":
        raw = mu * mu
    elif kind == "beisbart":
        raw = 2.0 * mu
    elif kind in ZERO_MEAN_KINDS:
        raw = np.zeros_like(mu)
    elif kind in ("r_mark_bullet", "r_mark_dot"):
        raw = mu.copy()
    elif kind == "variogram":
        raw = sigma2.copy()
    elif kind == "differentiation":
        n = len(curves)
        total = np.zeros_like(mu)
        for i in range(n):
            total += pair_score(kind, curves[i], np.delete(curves, i, axis=0)).sum(axis=0)
        raw = total / (n * (n - 1))
    else:
        raise InputDataError(f"unknown test function {kind!r}")
    return raw, sigma2


def global_kappa_functional(pattern: MarkedPointPattern, spec: TestFunctionSpec,
                            cfg: EstimationConfig, distances=None) -> SummaryCurve:
    """Global t-integrated correlation curve for curve-valued marks."""
    marks = _functional_marks(pattern)
    d = _distances(pattern, distances)
    n = pattern.n_points
    if n < 2:
        raise InputDataError("global estimation needs at least 2 points")
    num = np.zeros((len(cfg.r_grid), len(marks.t_grid)))
    den = np.zeros(len(cfg.r_grid))
    for i in range(n):
        f_j = np.delete(marks.curves, i, axis=0)
        w = _weight_matrix(np.delete(d[i], i), cfg)
        num_i, den_i = _pointwise_num_den(w, spec.kind, marks.curves[i], f_j)
        num += num_i
        den += den_i
    valid = den >= cfg.min_weight
    vals = np.full_like(num, np.nan)
    vals[valid] = num[valid] / den[valid, None]
    surface = PointwiseSurface(cfg.r_grid, marks.t_grid, vals, valid, meta={
        "testfn": spec.kind, "point": "global", "kernel": cfg.kernel,
        "bandwidth": cfg.bandwidth})
    raw, sigma2 = _pointwise_global_normalizers(spec.kind, marks.curves)
    return _kappa_from_surface(surface, raw, sigma2, spec.kind)


# ---------------------------------------------------------------------------
# batched permutation machinery (marks permuted, locations fixed)

def local_curve_matrix(distances: np.ndarray, i: int, mark_columns: np.ndarray,
                       kind: str, cfg: EstimationConfig):
    """Local kappa curves for point i under many mark assignments at once.

    mark_columns is (n_points, n_assignments); column 0 is typically the
    observed marks and the rest permutations.  Returns (values, valid)
    with values of shape (len(r_grid), n_assignments); valid does not
    depend on the assignment because locations are fixed.
    """
    n, p = mark_columns.shape
    w = _weight_matrix(np.delete(distances[i], i), cfg)
    den = _row_sums(w)
    valid = den >= cfg.min_weight
    m_i = mark_columns[i]  # (p,)
    m_cols = np.delete(mark_columns, i, axis=0)  # (n-1, p)
    mu_j = m_cols.mean(axis=0)
    sigma2_j = m_cols.var(axis=0, ddof=1) if n - 1 >= 2 else np.zeros(p)

    if kind in ("stoyan", "beisbart", "isham", "shimatani", "r_mark_bullet",
                "r_mark_dot", "variogram", "schlather"):
        s1 = w @ m_cols  # (r, p)
        if kind == "stoyan":
            num = s1 * m_i[None, :]
            raw = m_i * mu_j
        elif kind == "beisbart":
            num = den[:, None] * m_i[None, :] + s1
            raw = m_i + mu_j
        elif kind in ("isham", "shimatani"):
            num = m_i[None, :] * (s1 - mu_j[None, :] * den[:, None])
            raw = np.zeros(p)
        elif kind == "schlather":
            with np.errstate(invalid="ignore", divide="ignore"):
                mu_r = np.where(den[:, None] > 0,
                                s1 / np.where(den[:, None] > 0, den[:, None], 1.0), 0.0)
            num = m_i[None, :] * (s1 - mu_r * den[:, None])
            raw = np.zeros(p)
        elif kind == "r_mark_bullet":
            num = s1
            raw = mu_j.copy()
        elif kind == "r_mark_dot":
            num = den[:, None] * m_i[None, :]
            raw = m_i.astype(float).copy()
        else:  # variogram
            s2 = w @ (m_cols * m_cols)
            num = 0.5 * ((m_i * m_i)[None, :] * den[:, None] - 2.0 * m_i[None, :] * s1 + s2)
            raw = 0.5 * ((m_i - mu_j) ** 2 + sigma2_j)
    elif kind == "differentiation":
        num = np.empty((len(cfg.r_grid), p))
        raw = np.empty(p)
        for k in range(p):
            scores = pair_score(kind, float(m_i[k]), m_cols[:, k])
            num[:, k] = w @ scores
            raw[k] = scores.mean()
    else:
        raise InputDataError(f"unknown test function {kind!r}")

    if kind in ZERO_MEAN_KINDS:
        norms = sigma2_j
        if np.any(norms == 0.0):
            raise DegenerateStatisticError(
                f"{kind}: variance fallback normalizer is zero")
    else:
        norms = raw
        if np.any(norms == 0.0):
            raise DegenerateStatisticError(
                f"{kind}: normalizer is zero, curve undefined")

    values = np.full((len(cfg.r_grid), p), np.nan)
    values[valid] = num[valid] / den[valid, None] / norms[None, :]
    return values, valid


def global_curve_matrix(distances: np.ndarray, mark_columns: np.ndarray,
                        kind: str, cfg: EstimationConfig):
    """Global kappa curves under many mark assignments at once.

    Sums the per-point numerators/denominators, so it is consistent with
    local_curve_matrix by construction.  The global normalizer is
    permutation-invariant (permutations preserve the mark multiset).
    """
    n, p = mark_columns.shape
    num = np.zeros((len(cfg.r_grid), p))
    den = np.zeros(len(cfg.r_grid))
    spec = TestFunctionSpec(kind)
    for i in range(n):
        w = _weight_matrix(np.delete(distances[i], i), cfg)
        den_i = _row_sums(w)
        m_i = mark_columns[i]
        m_cols = np.delete(mark_columns, i, axis=0)
        if kind == "differentiation":
            for k in range(p):
                num[:, k] += w @ pair_score(kind, float(m_i[k]), m_cols[:, k])
        elif kind == "schlather":
            s1 = w @ m_cols
            with np.errstate(invalid="ignore", divide="ignore"):
                mu_r = np.where(den_i[:, None] > 0,
                                s1 / np.where(den_i[:, None] > 0, den_i[:, None], 1.0),
                                0.0)
            num += m_i[None, :] * (s1 - mu_r * den_i[:, None])
        elif kind in ("isham", "shimatani"):
            s1 = w @ m_cols
            mu_j = m_cols.mean(axis=0)
            num += m_i[None, :] * (s1 - mu_j[None, :] * den_i[:, None])
        elif kind == "stoyan":
            num += (w @ m_cols) * m_i[None, :]
        elif kind == "beisbart":
            num += den_i[:, None] * m_i[None, :] + w @ m_cols
        elif kind == "r_mark_bullet":
            num += w @ m_cols
        elif kind == "r_mark_dot":
            num += den_i[:, None] * m_i[None, :]
        elif kind == "variogram":
            s1 = w @ m_cols
            s2 = w @ (m_cols * m_cols)
            num += 0.5 * ((m_i * m_i)[None, :] * den_i[:, None]
                          - 2.0 * m_i[None, :] * s1 + s2)
        else:
            raise InputDataError(f"unknown test function {kind!r}")
        den += den_i
    raw = global_normalizer(spec, mark_columns[:, 0])
    norm, _ = _resolve_normalizer(kind, raw, float(mark_columns[:, 0].var(ddof=1)))
    valid = den >= cfg.min_weight
    values = np.full((len(cfg.r_grid), p), np.nan)
    values[valid] = num[valid] / den[valid, None] / norm
    return values, valid

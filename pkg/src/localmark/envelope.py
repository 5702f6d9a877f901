"""Random-labelling permutation tests with global rank envelopes.

Curves (observed + permuted) are ordered by extreme rank length: each
curve gets a pointwise two-sided rank at every jointly valid grid cell,
the rank vector is sorted ascending, and curves compare lexicographically
on the sorted vectors (smaller = more extreme).  Ties share the
more-extreme count, which makes the Monte-Carlo p-value conservative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .estimate import (
    EstimationConfig,
    SummaryCurve,
    global_curve_matrix,
    global_kappa,
    local_curve_matrix,
    local_kappa_functional,
    _distances,
    _pointwise_num_den,
    _row_sums,
    _pointwise_local_normalizers,
    _weight_matrix,
    _kappa_from_surface,
    PointwiseSurface,
)
from .exceptions import DegenerateStatisticError, InputDataError
from .pattern import FunctionalMarks, MarkedPointPattern, RealMarks
from .testfuncs import TestFunctionSpec


def permute_marks(pattern: MarkedPointPattern, rng: np.random.Generator):
    """Uniformly permute marks over the fixed locations (random labelling)."""
    order = rng.permutation(pattern.n_points)
    return pattern.with_marks(pattern.marks.take(order))


@dataclass
class PermutationSet:
    """Observed curve (index 0) plus permutation replicates on one r-grid."""

    r_grid: np.ndarray
    curves: np.ndarray  # (s + 1, len(r_grid))
    valid: np.ndarray  # joint validity mask
    seed: int | None = None

    def __post_init__(self):
        if self.curves.ndim != 2 or self.curves.shape[1] != len(self.r_grid):
            raise InputDataError("curves must be (s+1, len(r_grid))")
        if len(self.curves) < 2:
            raise InputDataError("need the observed curve plus >= 1 permutation")

    @property
    def n_permutations(self) -> int:
        return len(self.curves) - 1


@dataclass(frozen=True)
class SignificantRange:
    r_lo: float
    r_hi: float
    side: str  # "lower" | "upper"


@dataclass
class EnvelopeResult:
    r_grid: np.ndarray
    valid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    p_value: float
    alpha: float
    measures: np.ndarray  # per-curve ERL p-values (index 0 = observed)
    ranges: list[SignificantRange] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def significant(self) -> bool:
        return self.p_value <= self.alpha


def pointwise_ranks(curves: np.ndarray) -> np.ndarray:
    """Two-sided pointwise ranks; 1 = most extreme, ties share the rank."""
    c = curves.shape[0]
    ranks = np.empty(curves.shape, dtype=np.int64)
    for j in range(curves.shape[1]):
        col = curves[:, j]
        s = np.sort(col)
        below = np.searchsorted(s, col, side="left")
        above = c - np.searchsorted(s, col, side="right")
        ranks[:, j] = np.minimum(below, above) + 1
    return ranks


def erl_order(curves: np.ndarray, valid: np.ndarray | None = None):
    """Sorted pointwise-rank vectors and the extremeness order of the curves.

    Returns (sorted_ranks, order) where order[0] is the most extreme curve
    index (lexicographically smallest sorted rank vector).
    """
    curves = np.asarray(curves, dtype=float)
    if valid is not None:
        curves = curves[:, np.asarray(valid, dtype=bool)]
    if curves.shape[1] < 2:
        raise InputDataError("ERL ordering needs at least 2 jointly valid cells")
    ranks = pointwise_ranks(curves)
    sorted_ranks = np.sort(ranks, axis=1)
    order = np.lexsort(sorted_ranks.T[::-1])
    return sorted_ranks, order


def erl_pvalues(sorted_ranks: np.ndarray) -> np.ndarray:
    """Fraction of curves at least as extreme as each curve (itself included)."""
    c = len(sorted_ranks)
    idx = np.lexsort(sorted_ranks.T[::-1])
    rows = sorted_ranks[idx]
    if c > 1:
        new_group = np.any(rows[1:] != rows[:-1], axis=1)
        group_id = np.concatenate([[0], np.cumsum(new_group)])
    else:
        group_id = np.zeros(1, dtype=np.int64)
    leq = np.searchsorted(group_id, group_id, side="right")
    p = np.empty(c)
    p[idx] = leq / c
    return p


def envelope_test(pset: PermutationSet, alpha: float = 0.05) -> EnvelopeResult:
    """Global rank envelope test with extreme-rank-length ordering."""
    s = pset.n_permutations
    if s + 1 < 1.0 / alpha:
        needed = int(np.ceil(1.0 / alpha)) - 1
        raise InputDataError(
            f"{s} permutations cannot resolve level {alpha}; need at least {needed}")
    valid = np.asarray(pset.valid, dtype=bool)
    sorted_ranks, _ = erl_order(pset.curves, valid)
    p = erl_pvalues(sorted_ranks)
    keep = p > alpha  # curves forming the acceptance envelope
    n_r = len(pset.r_grid)
    lower = np.full(n_r, np.nan)
    upper = np.full(n_r, np.nan)
    lower[valid] = pset.curves[keep][:, valid].min(axis=0)
    upper[valid] = pset.curves[keep][:, valid].max(axis=0)
    result = EnvelopeResult(pset.r_grid, valid, lower, upper,
                            p_value=float(p[0]), alpha=alpha, measures=p)
    result.ranges = significant_ranges(pset.curves[0], result)
    return result


def significant_ranges(observed, envelope: EnvelopeResult) -> list[SignificantRange]:
    """Maximal contiguous r-runs where the observed curve exits the envelope."""
    values = observed.values if isinstance(observed, SummaryCurve) else np.asarray(observed)
    r = envelope.r_grid
    out = []
    for side, mask in (
        ("lower", envelope.valid & (values < envelope.lower)),
        ("upper", envelope.valid & (values > envelope.upper)),
    ):
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            continue
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks, [len(idx) - 1]])
        for a, b in zip(starts, ends):
            out.append(SignificantRange(float(r[idx[a]]), float(r[idx[b]]), side))
    out.sort(key=lambda g: (g.r_lo, g.r_hi, g.side))
    return out


@dataclass
class LocalTestReport:
    """Per-point permutation-test outcomes of a local association test."""

    p_values: np.ndarray
    alpha: float
    ranges: list[list[SignificantRange]]
    seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)
    envelopes: list[EnvelopeResult] | None = None

    @property
    def significant(self) -> np.ndarray:
        return self.p_values <= self.alpha

    @property
    def n_points(self) -> int:
        return len(self.p_values)


def _permutation_orders(n: int, s: int, seed, shared: bool, point_index: int = 0):
    if shared:
        rng = np.random.default_rng(seed)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(point_index + 1)[-1])
    return [rng.permutation(n) for _ in range(s)]


def _mark_columns(values: np.ndarray, orders) -> np.ndarray:
    return np.column_stack([values] + [values[o] for o in orders])


def _functional_local_curves(distances, i, marks: FunctionalMarks, orders,
                             kind: str, cfg: EstimationConfig):
    """Observed + permuted t-integrated local curves for one point."""
    w = _weight_matrix(np.delete(distances[i], i), cfg)
    den = _row_sums(w)
    valid = den >= cfg.min_weight
    curves = []
    for order in [np.arange(len(marks))] + list(orders):
        rows = marks.curves[order]
        f_i = rows[i]
        f_j = np.delete(rows, i, axis=0)
        num, _ = _pointwise_num_den(w, kind, f_i, f_j)
        vals = np.full_like(num, np.nan)
        vals[valid] = num[valid] / den[valid, None]
        surface = PointwiseSurface(cfg.r_grid, marks.t_grid, vals, valid, meta={})
        raw, sigma2 = _pointwise_local_normalizers(kind, f_i, f_j)
        curves.append(_kappa_from_surface(surface, raw, sigma2, kind).values)
    return np.vstack(curves), valid


def local_association_test(pattern: MarkedPointPattern, spec: TestFunctionSpec,
                           cfg: EstimationConfig, permutations: int = 499,
                           alpha: float = 0.05, seed: int | None = None,
                           shared_permutations: bool = True,
                           keep_envelopes: bool = False,
                           distances=None,
                           with_global: bool = False):
    """Per-point envelope tests of the local correlation curves.

    The same ``permutations`` relabellings are reused for every point by
    default, so per-point tests are comparable.  With ``with_global`` the
    matching global-curve envelope test is returned as well (computed from
    the same permutations at no extra distance cost).
    """
    d = _distances(pattern, distances)
    n = pattern.n_points
    if n < 2:
        raise InputDataError("local test needs at least 2 points")
    p_values = np.empty(n)
    all_ranges: list[list[SignificantRange]] = []
    envelopes = [] if keep_envelopes else None
    shared_orders = (_permutation_orders(n, permutations, seed, shared=True)
                     if shared_permutations else None)

    for i in range(n):
        orders = (shared_orders if shared_permutations else
                  _permutation_orders(n, permutations, seed, shared=False,
                                      point_index=i))
        if pattern.is_functional:
            curves, valid = _functional_local_curves(d, i, pattern.marks, orders,
                                                     spec.kind, cfg)
        else:
            cols = _mark_columns(pattern.marks.values, orders)
            values, valid = local_curve_matrix(d, i, cols, spec.kind, cfg)
            curves = values.T
        pset = PermutationSet(cfg.r_grid, curves, valid, seed=seed)
        res = envelope_test(pset, alpha)
        p_values[i] = res.p_value
        all_ranges.append(res.ranges)
        if keep_envelopes:
            res.meta["point"] = i
            envelopes.append(res)

    report = LocalTestReport(p_values=p_values, alpha=alpha, ranges=all_ranges,
                             seed=seed, envelopes=envelopes,
                             meta={"testfn": spec.kind,
                                   "permutations": permutations,
                                   "shared_permutations": shared_permutations})
    if not with_global:
        return report
    global_res = global_envelope_test(pattern, spec, cfg, permutations=permutations,
                                      alpha=alpha, seed=seed, distances=d)
    return report, global_res


def global_envelope_test(pattern: MarkedPointPattern, spec: TestFunctionSpec,
                         cfg: EstimationConfig, permutations: int = 499,
                         alpha: float = 0.05, seed: int | None = None,
                         distances=None) -> EnvelopeResult:
    """Envelope test of the global correlation curve under random labelling."""
    d = _distances(pattern, distances)
    n = pattern.n_points
    orders = _permutation_orders(n, permutations, seed, shared=True)
    if pattern.is_functional:
        observed = global_kappa(pattern, spec, cfg, distances=d)
        curves = [observed.values]
        valid = observed.valid.copy()
        for order in orders:
            permuted = pattern.with_marks(pattern.marks.take(order))
            c = global_kappa(permuted, spec, cfg, distances=d)
            curves.append(c.values)
            valid &= c.valid
        curves = np.vstack(curves)
    else:
        cols = _mark_columns(pattern.marks.values, orders)
        values, valid = global_curve_matrix(d, cols, spec.kind, cfg)
        curves = values.T
    pset = PermutationSet(cfg.r_grid, curves, valid, seed=seed)
    res = envelope_test(pset, alpha)
    res.meta["testfn"] = spec.kind
    res.meta["permutations"] = permutations
    return res

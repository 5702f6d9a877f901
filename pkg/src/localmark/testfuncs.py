"""Registry of mark test functions and their independence normalizers.

Each test function maps a pair of marks to a nonnegative score; dividing
its kernel-weighted average at distance r by its expectation under mark
independence gives a correlation curve whose no-association baseline is 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DegenerateStatisticError, InputDataError

KINDS = (
    "stoyan",
    "beisbart",
    "isham",
    "shimatani",
    "schlather",
    "r_mark_bullet",
    "r_mark_dot",
    "variogram",
    "differentiation",
)

# test functions whose expectation under independence is identically zero;
# their correlation curves are conventionally normalized by the mark
# variance instead
ZERO_MEAN_KINDS = frozenset({"isham", "shimatani", "schlather"})

# CLI spellings
CLI_ALIASES = {
    "stoyan": "stoyan",
    "beisbart": "beisbart",
    "isham": "isham",
    "shimatani": "shimatani",
    "schlather": "schlather",
    "rmark-bullet": "r_mark_bullet",
    "rmark-dot": "r_mark_dot",
    "variogram": "variogram",
    "differentiation": "differentiation",
}


@dataclass(frozen=True)
class TestFunctionSpec:
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputDataError(
                f"unknown test function {self.kind!r}; choose from {', '.join(KINDS)}")

    @property
    def requires_positive_marks(self) -> bool:
        return self.kind == "differentiation"

    @property
    def distance_dependent(self) -> bool:
        """True when the pair score itself depends on r (neighbour-mean centring)."""
        return self.kind == "schlather"


@dataclass(frozen=True)
class MarkContext:
    """Leave-one-out mark statistics seen from a fixed point.

    mu_j_at_r supplies the kernel-weighted neighbour mark mean at a given
    distance, used only by the neighbour-centred (schlather) score.
    """

    mu_j: float
    sigma2_j: float
    mu_j_at_r: Callable[[float], float] | None = None


def _check_positive(kind: str, *arrays):
    if kind == "differentiation":
        for a in arrays:
            if np.any(np.asarray(a) <= 0):
                raise DegenerateStatisticError(
                    "differentiation requires strictly positive marks")


def pair_score(kind: str, m_i, m_j, mu_j=None, mu_at_r=None):
    """Vectorized test-function value for a fixed first mark m_i.

    m_j may be an array; mu_j is the leave-one-out mean (centred scores),
    mu_at_r the neighbour mean at the evaluation distance (schlather).
    """
    m_j = np.asarray(m_j, dtype=float)
    if kind == "stoyan":
        return m_i * m_j
    if kind == "beisbart":
        return m_i + m_j
    if kind in ("isham", "shimatani"):
        return m_i * (m_j - mu_j)
    if kind == "schlather":
        return m_i * (m_j - mu_at_r)
    if kind == "r_mark_bullet":
        return m_j + 0.0
    if kind == "r_mark_dot":
        return np.broadcast_to(np.asarray(m_i, dtype=float), m_j.shape).copy()
    if kind == "variogram":
        return 0.5 * (m_i - m_j) ** 2
    if kind == "differentiation":
        _check_positive(kind, [m_i], m_j)
        return 1.0 - np.minimum(m_i, m_j) / np.maximum(m_i, m_j)
    raise InputDataError(f"unknown test function {kind!r}")


def evaluate_local(spec: TestFunctionSpec, m_i: float, m_j, ctx: MarkContext,
                   r: float | None = None):
    """Score of the local test function for the pair (m_i, m_j)."""
    mu_at_r = None
    if spec.kind == "schlather":
        if ctx.mu_j_at_r is None or r is None:
            raise InputDataError("schlather needs a neighbour-mean callable and r")
        mu_at_r = ctx.mu_j_at_r(r)
    return pair_score(spec.kind, m_i, m_j, mu_j=ctx.mu_j, mu_at_r=mu_at_r)


def evaluate_local_functional(spec: TestFunctionSpec, f_i, f_j, ctx: MarkContext,
                              t_index: int, r: float | None = None):
    """Score at one sample of the curve argument grid."""
    return evaluate_local(spec, float(np.asarray(f_i)[t_index]),
                          float(np.asarray(f_j)[t_index]), ctx, r=r)


def local_normalizer(spec: TestFunctionSpec, m_i: float, ctx: MarkContext,
                     marks_j=None) -> float:
    """Expectation of the local test function under mark independence.

    Zero-mean scores (isham/shimatani/schlather) return 0; callers fall
    back to the leave-one-out mark variance for the correlation ratio.
    The differentiation score has no closed form and uses the empirical
    mean over the other marks, which requires marks_j.
    """
    kind = spec.kind
    if kind == "stoyan":
        return float(m_i * ctx.mu_j)
    if kind == "beisbart":
        return float(m_i + ctx.mu_j)
    if kind in ZERO_MEAN_KINDS:
        return 0.0
    if kind == "r_mark_bullet":
        return float(ctx.mu_j)
    if kind == "r_mark_dot":
        return float(m_i)
    if kind == "variogram":
        return float(0.5 * ((m_i - ctx.mu_j) ** 2 + ctx.sigma2_j))
    if kind == "differentiation":
        if marks_j is None:
            raise InputDataError("differentiation normalizer needs the other marks")
        _check_positive(kind, [m_i], marks_j)
        return float(np.mean(pair_score(kind, m_i, marks_j)))
    raise InputDataError(f"unknown test function {kind!r}")


def global_normalizer(spec: TestFunctionSpec, marks) -> float:
    """Expectation of the test function under independence, global form."""
    values = np.asarray(getattr(marks, "values", marks), dtype=float)
    if len(values) < 2:
        raise InputDataError("global normalizer needs at least 2 marks")
    kind = spec.kind
    mu = values.mean()
    if kind == "stoyan":
        return float(mu * mu)
    if kind == "beisbart":
        return float(2.0 * mu)
    if kind in ("r_mark_bullet", "r_mark_dot"):
        return float(mu)
    if kind == "variogram":
        return float(values.var(ddof=1))
    if kind in ZERO_MEAN_KINDS:
        # conventional Moran-style variance normalization
        return float(values.var(ddof=1))
    if kind == "differentiation":
        _check_positive(kind, values)
        total = 0.0
        for i in range(len(values)):
            others = np.delete(values, i)
            total += float(np.sum(pair_score(kind, values[i], others)))
        return total / (len(values) * (len(values) - 1))
    raise InputDataError(f"unknown test function {kind!r}")

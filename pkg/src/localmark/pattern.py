"""Marked point pattern containers and mark summary statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import InputDataError
from .geometry import LinearNetwork, Window, network_distance_matrix


@dataclass(frozen=True)
class MarkSummary:
    mean: float
    variance: float


class RealMarks:
    """One scalar mark per point."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise InputDataError("real marks must be a 1-d vector")
        if not np.all(np.isfinite(values)):
            raise InputDataError("marks must be finite")
        self.values = values

    def __len__(self):
        return len(self.values)

    def take(self, order) -> "RealMarks":
        return RealMarks(self.values[order])


class FunctionalMarks:
    """One sampled curve per point, all sharing the same argument grid."""

    def __init__(self, t_grid, curves):
        t_grid = np.asarray(t_grid, dtype=float)
        curves = np.asarray(curves, dtype=float)
        if t_grid.ndim != 1 or len(t_grid) < 2:
            raise InputDataError("functional marks need a t-grid with >= 2 samples")
        if np.any(np.diff(t_grid) <= 0):
            raise InputDataError("t-grid must be strictly increasing")
        if curves.ndim != 2 or curves.shape[1] != len(t_grid):
            raise InputDataError("curves must be a (points x t-grid) matrix")
        if not (np.all(np.isfinite(curves)) and np.all(np.isfinite(t_grid))):
            raise InputDataError("functional marks must be finite")
        self.t_grid = t_grid
        self.curves = curves

    def __len__(self):
        return len(self.curves)

    def take(self, order) -> "FunctionalMarks":
        return FunctionalMarks(self.t_grid, self.curves[order])


class MarkedPointPattern:
    """Point locations (planar or on a network) plus their marks.

    Construction validates the pattern: mark count must match point count,
    points must lie in the window / on the network, and locations must be
    distinct (simple pattern).
    """

    def __init__(self, *, window=None, points=None, network=None,
                 segments=None, offsets=None, marks=None):
        if marks is None or not isinstance(marks, (RealMarks, FunctionalMarks)):
            raise InputDataError("marks must be RealMarks or FunctionalMarks")
        planar = window is not None
        if planar:
            if not isinstance(window, Window) or points is None:
                raise InputDataError("planar pattern needs a Window and points")
            points = np.atleast_2d(np.asarray(points, dtype=float))
            if points.shape[1] != 2 or not np.all(np.isfinite(points)):
                raise InputDataError("points must be finite (n, 2) coordinates")
            if not np.all(window.contains(points)):
                raise InputDataError("point outside the observation window")
            xy = points
        else:
            if not isinstance(network, LinearNetwork):
                raise InputDataError("pattern needs either a window or a network")
            segments, offsets = network.validate_locations(segments, offsets)
            points = None
            xy = network.locations_xy(segments, offsets)
        n = len(xy)
        if len(marks) != n:
            raise InputDataError(
                f"mark count ({len(marks)}) does not match point count ({n})")
        if n > 1 and len(np.unique(xy, axis=0)) != n:
            raise InputDataError("duplicate point locations: pattern must be simple")
        self.window = window
        self.points = points
        self.network = network
        self.segments = segments
        self.offsets = offsets
        self.marks = marks
        self._xy = xy
        self._dist = None

    @classmethod
    def planar(cls, window, points, marks) -> "MarkedPointPattern":
        return cls(window=window, points=points, marks=marks)

    @classmethod
    def on_network(cls, network, segments, offsets, marks) -> "MarkedPointPattern":
        return cls(network=network, segments=segments, offsets=offsets, marks=marks)

    @property
    def n_points(self) -> int:
        return len(self._xy)

    @property
    def is_network(self) -> bool:
        return self.network is not None

    @property
    def is_functional(self) -> bool:
        return isinstance(self.marks, FunctionalMarks)

    def coordinates(self) -> np.ndarray:
        """Planar coordinates (embedded coordinates for network patterns)."""
        return self._xy

    def intensity(self) -> float:
        if self.is_network:
            return self.n_points / self.network.total_length
        return self.n_points / self.window.area

    def pairwise_distances(self) -> np.ndarray:
        """Interpoint distance matrix; cached after the first call."""
        if self._dist is None:
            if self.is_network:
                self._dist = network_distance_matrix(
                    self.network, (self.segments, self.offsets))
            else:
                self._dist = cdist(self.points, self.points)
        return self._dist

    def with_marks(self, marks) -> "MarkedPointPattern":
        """Same locations with replaced marks; the distance cache is shared."""
        if self.is_network:
            out = MarkedPointPattern.on_network(
                self.network, self.segments, self.offsets, marks)
        else:
            out = MarkedPointPattern.planar(self.window, self.points, marks)
        out._dist = self._dist
        return out


def validate(pattern: MarkedPointPattern) -> MarkedPointPattern:
    """Patterns are validated on construction; provided for symmetry."""
    if not isinstance(pattern, MarkedPointPattern):
        raise InputDataError("not a MarkedPointPattern")
    return pattern


def mark_summary(marks, excluding: int | None = None) -> MarkSummary:
    """Mean and sample variance (n-1 divisor) of real marks.

    With ``excluding`` set, the statistics are computed leaving that
    point's mark out.
    """
    values = marks.values if isinstance(marks, RealMarks) else np.asarray(marks, float)
    if excluding is not None:
        values = np.delete(values, excluding)
    if len(values) < 2:
        raise InputDataError("mark summary needs at least 2 marks")
    return MarkSummary(float(values.mean()), float(values.var(ddof=1)))


def pairwise_distances(pattern: MarkedPointPattern) -> np.ndarray:
    return pattern.pairwise_distances()

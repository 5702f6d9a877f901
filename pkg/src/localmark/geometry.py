"""Planar windows, linear networks and distance computations.

Distances on a linear network are shortest-path distances along the
segments.  Query points located mid-segment are handled exactly: any
shortest path between two locations either stays on their common segment
or passes through segment endpoints, so the pairwise distance reduces to
a minimum over endpoint combinations on top of the node-to-node shortest
path matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import shapely
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .exceptions import InputDataError


class Point2(NamedTuple):
    x: float
    y: float


class NetworkLocation(NamedTuple):
    """A position on a network: arc-length offset from the segment's first endpoint."""

    segment: int
    offset: float


def euclidean_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(np.hypot(*(p - q)))


class Window:
    """A simple-polygon observation window."""

    def __init__(self, vertices):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
            raise InputDataError("window needs at least 3 (x, y) vertices")
        if not np.all(np.isfinite(vertices)):
            raise InputDataError("window vertices must be finite")
        poly = shapely.Polygon(vertices)
        if poly.area <= 0.0:
            raise InputDataError("degenerate window: polygon has zero area")
        if not poly.is_valid:
            raise InputDataError("degenerate window: polygon is self-intersecting")
        self.vertices = vertices
        self._poly = poly
        self.area = float(poly.area)

    def contains(self, points) -> np.ndarray:
        """Boolean mask of points inside or on the boundary of the window."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return shapely.covers(self._poly, shapely.points(points))

    @property
    def bounds(self):
        return self._poly.bounds

    def shorter_side(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return min(xmax - xmin, ymax - ymin)

    def __repr__(self):
        return f"Window({len(self.vertices)} vertices, area={self.area:g})"


def build_window(vertices) -> Window:
    return Window(vertices)


@dataclass(frozen=True)
class LinearNetwork:
    """Union of straight segments meeting only at shared endpoint nodes."""

    nodes: np.ndarray  # (N, 2)
    segments: np.ndarray  # (K, 2) node indices
    lengths: np.ndarray = field(init=False, repr=False)
    total_length: float = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        segments = np.asarray(self.segments, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise InputDataError("network nodes must be an (N, 2) array")
        if not np.all(np.isfinite(nodes)):
            raise InputDataError("network node coordinates must be finite")
        if segments.ndim != 2 or segments.shape[1] != 2 or len(segments) == 0:
            raise InputDataError("network needs at least one (u, v) segment")
        if segments.min() < 0 or segments.max() >= len(nodes):
            raise InputDataError("segment endpoint index out of range")
        if np.any(segments[:, 0] == segments[:, 1]):
            raise InputDataError("zero-length segment: u == v")
        key = np.sort(segments, axis=1)
        if len(np.unique(key, axis=0)) != len(segments):
            raise InputDataError("duplicate segments in network")
        lengths = np.hypot(*(nodes[segments[:, 0]] - nodes[segments[:, 1]]).T)
        if np.any(lengths <= 0.0):
            raise InputDataError("zero-length segment: coincident endpoints")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "total_length", float(lengths.sum()))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def _graph(self) -> csr_matrix:
        u, v = self.segments[:, 0], self.segments[:, 1]
        n = self.n_nodes
        w = self.lengths
        return csr_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(n, n),
        )

    def n_components(self) -> int:
        return connected_components(self._graph(), directed=False)[0]

    def node_distances(self, sources: np.ndarray) -> np.ndarray:
        """Shortest-path distances from the given node indices to all nodes."""
        return dijkstra(self._graph(), directed=False, indices=sources)

    def locations_xy(self, segments, offsets) -> np.ndarray:
        """Embed network locations back into the plane."""
        segments = np.asarray(segments, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=float)
        a = self.nodes[self.segments[segments, 0]]
        b = self.nodes[self.segments[segments, 1]]
        t = (offsets / self.lengths[segments])[:, None]
        return a + t * (b - a)

    def validate_locations(self, segments, offsets):
        segments = np.asarray(segments, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=float)
        if segments.shape != offsets.shape or segments.ndim != 1:
            raise InputDataError("segments and offsets must be 1-d and equally long")
        if np.any((segments < 0) | (segments >= self.n_segments)):
            raise InputDataError("network location has invalid segment index")
        if not np.all(np.isfinite(offsets)):
            raise InputDataError("network location offsets must be finite")
        tol = 1e-9 * max(1.0, self.lengths.max())
        if np.any(offsets < -tol) or np.any(offsets > self.lengths[segments] + tol):
            raise InputDataError("network location offset outside its segment")
        return segments, np.clip(offsets, 0.0, self.lengths[segments])


def build_network(nodes, segments) -> LinearNetwork:
    return LinearNetwork(np.asarray(nodes, dtype=float), np.asarray(segments))


def network_distance_matrix(net: LinearNetwork, locations: Sequence[NetworkLocation] | tuple) -> np.ndarray:
    """Symmetric matrix of shortest-path distances between network locations.

    Locations may be a sequence of NetworkLocation or a (segments, offsets)
    pair of arrays.  Locations on different graph components get +inf.
    """
    if (
        isinstance(locations, tuple)
        and len(locations) == 2
        and isinstance(locations[0], (np.ndarray, list))
        and not isinstance(locations[0], NetworkLocation)
    ):
        segments, offsets = locations
    else:
        segments = [loc[0] for loc in locations]
        offsets = [loc[1] for loc in locations]
    segments, offsets = net.validate_locations(segments, offsets)
    p = len(segments)
    if p == 0:
        return np.zeros((0, 0))

    ends = net.segments[segments]  # (p, 2) node ids
    used_nodes = np.unique(ends)
    dist_nodes = net.node_distances(used_nodes)  # (len(used), N)
    pos = {int(n): k for k, n in enumerate(used_nodes)}
    row = np.array([pos[int(n)] for n in ends[:, 0]])
    row2 = np.array([pos[int(n)] for n in ends[:, 1]])

    # distance from each location to its own segment endpoints
    to_u = offsets
    to_v = net.lengths[segments] - offsets

    # d[i, j] = min over endpoint choices of to_end_i + node_dist + to_end_j
    duu = dist_nodes[row][:, ends[:, 0]]
    duv = dist_nodes[row][:, ends[:, 1]]
    dvu = dist_nodes[row2][:, ends[:, 0]]
    dvv = dist_nodes[row2][:, ends[:, 1]]
    out = np.minimum.reduce([
        to_u[:, None] + duu + to_u[None, :],
        to_u[:, None] + duv + to_v[None, :],
        to_v[:, None] + dvu + to_u[None, :],
        to_v[:, None] + dvv + to_v[None, :],
    ])

    # pairs on a shared segment can also connect directly along it
    same = segments[:, None] == segments[None, :]
    direct = np.abs(offsets[:, None] - offsets[None, :])
    out = np.where(same, np.minimum(out, direct), out)
    np.fill_diagonal(out, 0.0)
    return np.minimum(out, out.T)


def network_distance(net: LinearNetwork, a: NetworkLocation, b: NetworkLocation) -> float:
    return float(network_distance_matrix(net, [a, b])[0, 1])

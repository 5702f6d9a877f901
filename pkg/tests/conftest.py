import numpy as np
import pytest

import localmark as lm


@pytest.fixture
def square():
    return lm.Window([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


@pytest.fixture
def small_network():
    # square with one diagonal; unit side length
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    segments = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
    return lm.build_network(nodes, segments)


def random_planar_pattern(rng, n, window=None, positive=True):
    window = window or lm.Window([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    points = rng.uniform(0.05, 0.95, size=(n, 2))
    lo = 0.5 if positive else -2.0
    marks = lm.RealMarks(rng.uniform(lo, 4.0, size=n))
    return lm.MarkedPointPattern.planar(window, points, marks)


def random_network_pattern(rng, n, network, positive=True):
    probs = network.lengths / network.total_length
    segs = rng.choice(network.n_segments, size=n, p=probs)
    offs = rng.uniform(0.0, network.lengths[segs])
    lo = 0.5 if positive else -2.0
    marks = lm.RealMarks(rng.uniform(lo, 4.0, size=n))
    return lm.MarkedPointPattern.on_network(network, segs, offs, marks)


def random_functional_pattern(rng, n, n_t=4, positive=True):
    window = lm.Window([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    points = rng.uniform(0.05, 0.95, size=(n, 2))
    t_grid = np.sort(rng.uniform(0.0, 1.0, size=n_t))
    while np.any(np.diff(t_grid) <= 0):
        t_grid = np.sort(rng.uniform(0.0, 1.0, size=n_t))
    lo = 0.5 if positive else -2.0
    curves = rng.uniform(lo, 4.0, size=(n, n_t))
    return lm.MarkedPointPattern.planar(window, points,
                                        lm.FunctionalMarks(t_grid, curves))

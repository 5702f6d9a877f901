import numpy as np
import pytest
from scipy.spatial.distance import cdist

import localmark as lm
from localmark.exceptions import InputDataError


class TestMarks:
    def test_real_marks_validation(self):
        with pytest.raises(InputDataError):
            lm.RealMarks([[1.0, 2.0]])
        with pytest.raises(InputDataError):
            lm.RealMarks([1.0, np.nan])
        m = lm.RealMarks([3.0, 1.0, 2.0])
        assert m.take([2, 0, 1]).values.tolist() == [2.0, 3.0, 1.0]

    def test_functional_marks_validation(self):
        with pytest.raises(InputDataError):
            lm.FunctionalMarks([0.0], [[1.0]])  # t-grid too short
        with pytest.raises(InputDataError):
            lm.FunctionalMarks([0.0, 0.0], [[1.0, 2.0]])  # not increasing
        with pytest.raises(InputDataError):
            lm.FunctionalMarks([0.0, 1.0], [[1.0, np.inf]])
        f = lm.FunctionalMarks([0.0, 1.0], [[1.0, 2.0], [3.0, 4.0]])
        assert f.take([1, 0]).curves[0].tolist() == [3.0, 4.0]


class TestPlanarPattern:
    def test_construction_and_intensity(self, square):
        p = lm.MarkedPointPattern.planar(
            square, [(0.2, 0.2), (0.8, 0.8)], lm.RealMarks([1.0, 2.0]))
        assert p.n_points == 2
        assert not p.is_network
        assert p.intensity() == pytest.approx(2.0)

    def test_point_outside_window(self, square):
        with pytest.raises(InputDataError):
            lm.MarkedPointPattern.planar(square, [(2.0, 0.5)], lm.RealMarks([1.0]))

    def test_mark_count_mismatch(self, square):
        with pytest.raises(InputDataError):
            lm.MarkedPointPattern.planar(
                square, [(0.2, 0.2), (0.8, 0.8)], lm.RealMarks([1.0]))

    def test_duplicate_points_rejected(self, square):
        with pytest.raises(InputDataError):
            lm.MarkedPointPattern.planar(
                square, [(0.5, 0.5), (0.5, 0.5)], lm.RealMarks([1.0, 2.0]))

    def test_pairwise_distances_cached(self, square):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.1, 0.9, size=(5, 2))
        p = lm.MarkedPointPattern.planar(square, pts, lm.RealMarks(rng.normal(size=5)))
        d = p.pairwise_distances()
        assert np.allclose(d, cdist(pts, pts))
        assert p.pairwise_distances() is d

    def test_with_marks_shares_distances(self, square):
        p = lm.MarkedPointPattern.planar(
            square, [(0.2, 0.2), (0.8, 0.8)], lm.RealMarks([1.0, 2.0]))
        d = p.pairwise_distances()
        q = p.with_marks(lm.RealMarks([5.0, 6.0]))
        assert q.pairwise_distances() is d
        assert q.marks.values.tolist() == [5.0, 6.0]


class TestNetworkPattern:
    def test_construction(self, small_network):
        p = lm.MarkedPointPattern.on_network(
            small_network, [0, 1], [0.5, 0.5], lm.RealMarks([1.0, 2.0]))
        assert p.is_network
        assert p.intensity() == pytest.approx(2.0 / small_network.total_length)
        d = p.pairwise_distances()
        assert d[0, 1] == pytest.approx(1.0)

    def test_duplicate_embedded_locations(self, small_network):
        # segment 0 end == segment 1 start: same embedded point
        with pytest.raises(InputDataError):
            lm.MarkedPointPattern.on_network(
                small_network, [0, 1], [1.0, 0.0], lm.RealMarks([1.0, 2.0]))

    def test_coordinates_embedding(self, small_network):
        p = lm.MarkedPointPattern.on_network(
            small_network, [0], [0.25], lm.RealMarks([1.0]))
        assert p.coordinates()[0] == pytest.approx([0.25, 0.0])


def test_mark_summary_leave_one_out():
    marks = lm.RealMarks([1.0, 2.0, 4.0, 8.0])
    s = lm.mark_summary(marks)
    assert s.mean == pytest.approx(3.75)
    assert s.variance == pytest.approx(np.var([1, 2, 4, 8], ddof=1))
    s0 = lm.mark_summary(marks, excluding=0)
    assert s0.mean == pytest.approx(np.mean([2, 4, 8]))
    assert s0.variance == pytest.approx(np.var([2, 4, 8], ddof=1))
    with pytest.raises(InputDataError):
        lm.mark_summary(lm.RealMarks([1.0]))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import localmark as lm
from localmark.envelope import pointwise_ranks
from localmark.exceptions import InputDataError

import oracles
from conftest import random_functional_pattern, random_planar_pattern

R_GRID = np.linspace(0.0, 0.4, 13)[1:]


def cfg(h=0.12):
    return lm.EstimationConfig(r_grid=R_GRID, bandwidth=h)


def test_permute_marks_is_relabelling(square):
    rng = np.random.default_rng(1)
    p = random_planar_pattern(rng, 10, square)
    p.pairwise_distances()
    q = lm.permute_marks(p, np.random.default_rng(2))
    assert sorted(q.marks.values) == sorted(p.marks.values)
    assert q.pairwise_distances() is p.pairwise_distances()


def test_pointwise_ranks_hand_case():
    curves = np.array([[1.0, 5.0],
                       [2.0, 4.0],
                       [3.0, 3.0],
                       [4.0, 2.0],
                       [5.0, 1.0]])
    ranks = pointwise_ranks(curves)
    assert ranks[:, 0].tolist() == [1, 2, 3, 2, 1]
    assert ranks[:, 1].tolist() == [1, 2, 3, 2, 1]


def test_pointwise_ranks_ties_share():
    curves = np.array([[1.0], [1.0], [2.0], [3.0]])
    ranks = pointwise_ranks(curves)[:, 0].tolist()
    # the two tied minima both see zero strictly below
    assert ranks == [1, 1, 2, 1]


class TestErlOrdering:
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        s = int(rng.integers(2, 8))
        n_r = int(rng.integers(2, 6))
        curves = rng.normal(size=(s + 1, n_r))
        if rng.random() < 0.4:
            curves = np.round(curves, 1)  # provoke ties
        sorted_ranks, order = lm.erl_order(curves)
        want_vectors = oracles.erl_rank_vectors(curves)
        for k in range(s + 1):
            assert tuple(sorted_ranks[k]) == want_vectors[k]
        assert order.tolist() == oracles.erl_order(curves)
        got_p = lm.erl_pvalues(sorted_ranks)
        assert np.allclose(got_p, oracles.erl_pvalues(curves))

    def test_pvalues_on_grid(self):
        rng = np.random.default_rng(3)
        s = 19
        curves = rng.normal(size=(s + 1, 10))
        sorted_ranks, _ = lm.erl_order(curves)
        p = lm.erl_pvalues(sorted_ranks)
        grid = np.arange(1, s + 2) / (s + 1)
        assert all(np.any(np.isclose(v, grid)) for v in p)

    def test_dominating_observed_gets_minimal_p(self):
        s = 7
        rng = np.random.default_rng(5)
        curves = rng.uniform(1.0, 2.0, size=(s + 1, 6))
        curves[0] = 10.0  # strictly above everything at every r
        sorted_ranks, order = lm.erl_order(curves)
        assert order[0] == 0
        p = lm.erl_pvalues(sorted_ranks)
        assert p[0] == pytest.approx(1.0 / (s + 1))

    def test_needs_two_valid_cells(self):
        with pytest.raises(InputDataError):
            lm.erl_order(np.zeros((3, 4)), valid=np.array([True, False, False, False]))


class TestEnvelopeTest:
    def make_pset(self, seed=0, s=39, n_r=11):
        rng = np.random.default_rng(seed)
        curves = rng.normal(size=(s + 1, n_r))
        return lm.PermutationSet(np.linspace(0.1, 1.0, n_r), curves,
                                 np.ones(n_r, dtype=bool))

    def test_insufficient_permutations(self):
        pset = self.make_pset(s=10)
        with pytest.raises(InputDataError):
            lm.envelope_test(pset, alpha=0.05)

    def test_ranges_iff_significant(self):
        for seed in range(30):
            pset = self.make_pset(seed=seed)
            res = lm.envelope_test(pset, alpha=0.05)
            assert bool(res.ranges) == res.significant

    def test_observed_outside_envelope_when_extreme(self):
        pset = self.make_pset(seed=1)
        pset.curves[0] = 50.0
        res = lm.envelope_test(pset, alpha=0.05)
        assert res.significant
        assert res.p_value == pytest.approx(1.0 / 40.0)
        assert all(g.side == "upper" for g in res.ranges)
        # the single range spans the whole grid
        assert res.ranges[0].r_lo == pset.r_grid[0]
        assert res.ranges[-1].r_hi == pset.r_grid[-1]

    def test_envelope_bounds_order(self):
        pset = self.make_pset(seed=2)
        res = lm.envelope_test(pset, alpha=0.05)
        assert np.all(res.lower[res.valid] <= res.upper[res.valid])

    def test_invalid_cells_masked(self):
        pset = self.make_pset(seed=3)
        pset.valid[4] = False
        res = lm.envelope_test(pset, alpha=0.05)
        assert np.isnan(res.lower[4]) and np.isnan(res.upper[4])


class TestGlobalEnvelope:
    def test_constant_marks_never_significant(self, square):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.1, 0.9, size=(15, 2))
        p = lm.MarkedPointPattern.planar(square, pts,
                                         lm.RealMarks(np.full(15, 2.0)))
        res = lm.global_envelope_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                      permutations=39, seed=0)
        assert res.p_value == 1.0
        assert not res.significant

    def test_deterministic_in_seed(self, square):
        rng = np.random.default_rng(9)
        p = random_planar_pattern(rng, 25, square)
        a = lm.global_envelope_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                    permutations=39, seed=11)
        b = lm.global_envelope_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                    permutations=39, seed=11)
        assert a.p_value == b.p_value
        assert np.array_equal(a.lower, b.lower, equal_nan=True)
        assert np.array_equal(a.measures, b.measures)

    def test_functional_marks_supported(self):
        rng = np.random.default_rng(13)
        p = random_functional_pattern(rng, 12, n_t=3)
        res = lm.global_envelope_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                      permutations=39, seed=1)
        assert 0.0 < res.p_value <= 1.0


class TestLocalAssociationTest:
    def test_report_shape_and_determinism(self, square):
        rng = np.random.default_rng(15)
        p = random_planar_pattern(rng, 20, square)
        spec = lm.TestFunctionSpec("stoyan")
        a = lm.local_association_test(p, spec, cfg(), permutations=39, seed=4)
        b = lm.local_association_test(p, spec, cfg(), permutations=39, seed=4)
        assert a.n_points == 20
        assert np.array_equal(a.p_values, b.p_values)
        assert np.all((a.p_values > 0) & (a.p_values <= 1))
        for i in range(20):
            assert bool(a.ranges[i]) == bool(a.p_values[i] <= a.alpha)

    def test_constant_marks_nothing_significant(self, square):
        rng = np.random.default_rng(17)
        pts = rng.uniform(0.1, 0.9, size=(12, 2))
        p = lm.MarkedPointPattern.planar(square, pts,
                                         lm.RealMarks(np.full(12, 2.0)))
        rep = lm.local_association_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                        permutations=39, seed=0)
        assert np.all(rep.p_values == 1.0)
        assert not rep.significant.any()

    def test_with_global_reuses_permutations(self, square):
        rng = np.random.default_rng(19)
        p = random_planar_pattern(rng, 18, square)
        spec = lm.TestFunctionSpec("stoyan")
        rep, glob = lm.local_association_test(p, spec, cfg(), permutations=39,
                                              seed=6, with_global=True)
        solo = lm.global_envelope_test(p, spec, cfg(), permutations=39, seed=6)
        assert glob.p_value == solo.p_value

    def test_independent_permutations_flag(self, square):
        rng = np.random.default_rng(21)
        p = random_planar_pattern(rng, 15, square)
        spec = lm.TestFunctionSpec("stoyan")
        shared = lm.local_association_test(p, spec, cfg(), permutations=39,
                                           seed=8, shared_permutations=True)
        indep = lm.local_association_test(p, spec, cfg(), permutations=39,
                                          seed=8, shared_permutations=False)
        assert not np.array_equal(shared.p_values, indep.p_values)

    def test_functional_local_test(self):
        rng = np.random.default_rng(23)
        p = random_functional_pattern(rng, 10, n_t=3)
        rep = lm.local_association_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                        permutations=39, seed=2)
        assert rep.n_points == 10
        assert np.all(rep.p_values > 0)

    def test_keep_envelopes(self, square):
        rng = np.random.default_rng(25)
        p = random_planar_pattern(rng, 8, square)
        rep = lm.local_association_test(p, lm.TestFunctionSpec("stoyan"), cfg(),
                                        permutations=39, seed=3,
                                        keep_envelopes=True)
        assert len(rep.envelopes) == 8
        assert rep.envelopes[3].meta["point"] == 3

"""Acceptance suite: one test per release criterion.

Each test name carries the criterion number; `pytest -v` therefore prints
one pass/fail line per criterion.  The desk-scale scenario studies (100
replicates, 99 permutations) are seed-pinned and take a few minutes each
on one core.
"""

import itertools
import time

import numpy as np
import pytest
from click.testing import CliRunner

import localmark as lm
from localmark.cli import main as cli_main
from localmark.testfuncs import KINDS

import oracles

ACCEPT_SEED = 20260823
ALPHA = 0.05

# desk-scale study settings: distance range [0, 0.25] at 64 steps, 99
# permutations. The global test smooths at the rule-of-thumb bandwidth
# (the field default); the per-point local tests use a wider bandwidth
# so single-point curves pool enough pairs for power at n=500
STUDY_EST = {"r_max": 0.25, "r_steps": 64, "bandwidth": 0.05,
             "global_bandwidth": "stoyan"}
# scenario IV band half-width and local bandwidth calibrated jointly:
# wide enough for per-point detection of band points, narrow enough to
# hold the global rejection rate at its reference level
BAND_HALFWIDTH = 0.046
BAND_LOCAL_BANDWIDTH = 0.09


def run_study(scenario, **kwargs):
    cfg = lm.ScenarioConfig(scenario=scenario, band_halfwidth=BAND_HALFWIDTH,
                            intensity=kwargs.pop("intensity", 500.0))
    return lm.replicate_study(
        cfg, replicates=kwargs.pop("replicates", 100),
        permutations=kwargs.pop("permutations", 99), alpha=ALPHA,
        seed=ACCEPT_SEED, est=dict(STUDY_EST, **kwargs.pop("est", {})))


@pytest.fixture(scope="module")
def study_I():
    return run_study("I")


@pytest.fixture(scope="module")
def study_II():
    return run_study("II")


@pytest.fixture(scope="module")
def study_III():
    return run_study("III")


@pytest.fixture(scope="module")
def study_IV():
    return run_study("IV", est={"bandwidth": BAND_LOCAL_BANDWIDTH})


# ---------------------------------------------------------------------------
# criterion 1: estimators match brute-force oracles on small patterns

def _random_case(rng, case):
    """One of planar/network x real/functional with n <= 12 points."""
    n = int(rng.integers(4, 13))
    on_network = case % 2 == 1
    functional = (case // 2) % 2 == 1
    if on_network:
        # 6-node network: pentagon with a centre hub
        theta = np.linspace(0, 2 * np.pi, 6)[:5]
        nodes = np.vstack([np.column_stack([np.cos(theta), np.sin(theta)]),
                           [[0.0, 0.0]]])
        segs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0),
                (0, 5), (2, 5)]
        net = lm.build_network(nodes, segs)
        s = rng.integers(0, net.n_segments, size=n)
        o = rng.uniform(0.05, 0.95, size=n) * net.lengths[s]
        if functional:
            marks = lm.FunctionalMarks(np.sort(rng.uniform(0, 1, 3)) + [0, 0.2, 0.4],
                                       rng.uniform(0.5, 4.0, size=(n, 3)))
        else:
            marks = lm.RealMarks(rng.uniform(0.5, 4.0, size=n))
        return lm.MarkedPointPattern.on_network(net, s, o, marks)
    w = lm.unit_square()
    pts = rng.uniform(0.05, 0.95, size=(n, 2))
    if functional:
        marks = lm.FunctionalMarks(np.sort(rng.uniform(0, 1, 3)) + [0, 0.2, 0.4],
                                   rng.uniform(0.5, 4.0, size=(n, 3)))
    else:
        marks = lm.RealMarks(rng.uniform(0.5, 4.0, size=n))
    return lm.MarkedPointPattern.planar(w, pts, marks)


def test_criterion_01_oracle_equivalence_all_estimators():
    rng = np.random.default_rng(ACCEPT_SEED)
    r_grid = np.linspace(0.0, 0.6, 9)[1:]
    cfg = lm.EstimationConfig(r_grid=r_grid, bandwidth=0.15)
    start = time.monotonic()
    for case in range(50):
        p = _random_case(rng, case)
        d = p.pairwise_distances()
        i = int(rng.integers(p.n_points))
        for kind in KINDS:
            spec = lm.TestFunctionSpec(kind)
            if p.is_functional:
                loc = lm.local_kappa_functional(p, i, spec, cfg, distances=d)
                want, valid = oracles.local_kappa_functional(
                    d.tolist(), p.marks.curves.tolist(), i, kind,
                    p.marks.t_grid.tolist(), r_grid, 0.15)
                glob = lm.global_kappa(p, spec, cfg, distances=d)
                gwant, gvalid = oracles.global_kappa_functional(
                    d.tolist(), p.marks.curves.tolist(), kind,
                    p.marks.t_grid.tolist(), r_grid, 0.15)
            else:
                loc = lm.local_kappa(p, i, spec, cfg, distances=d)
                want, valid = oracles.local_kappa(
                    d.tolist(), p.marks.values, i, kind, r_grid, 0.15)
                glob = lm.global_kappa(p, spec, cfg, distances=d)
                gwant, gvalid = oracles.global_kappa(
                    d.tolist(), p.marks.values, kind, r_grid, 0.15)
            assert np.array_equal(loc.valid, valid)
            assert np.allclose(loc.values[valid], want[valid], atol=1e-12)
            assert np.array_equal(glob.valid, gvalid)
            assert np.allclose(glob.values[gvalid], gwant[gvalid], atol=1e-12)
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# criterion 2: analytic invariants

def test_criterion_02_analytic_invariants():
    rng = np.random.default_rng(1)
    w = lm.unit_square()
    pts = rng.uniform(0.05, 0.95, size=(30, 2))
    cfg = lm.EstimationConfig(r_grid=np.linspace(0, 0.3, 17)[1:], bandwidth=0.08)

    # constant marks: kappa_stoyan == 1 exactly, variogram numerator == 0
    p = lm.MarkedPointPattern.planar(w, pts, lm.RealMarks(np.full(30, 2.0)))
    g = lm.global_kappa(p, lm.TestFunctionSpec("stoyan"), cfg)
    assert np.all(g.values[g.valid] == 1.0)
    loc = lm.local_kappa(p, 5, lm.TestFunctionSpec("stoyan"), cfg)
    assert np.all(loc.values[loc.valid] == 1.0)
    c = lm.local_c(p, 5, lm.TestFunctionSpec("variogram"), cfg)
    assert np.all(c.values[c.valid] == 0.0)

    # mark-scaling invariance of the scale-free correlations
    q = lm.MarkedPointPattern.planar(w, pts,
                                     lm.RealMarks(rng.uniform(0.5, 4.0, 30)))
    scaled = q.with_marks(lm.RealMarks(13.7 * q.marks.values))
    for kind in ("stoyan", "variogram", "differentiation"):
        spec = lm.TestFunctionSpec(kind)
        a = lm.global_kappa(q, spec, cfg)
        b = lm.global_kappa(scaled, spec, cfg)
        assert np.allclose(a.values[a.valid], b.values[b.valid], atol=1e-10)
        la = lm.local_kappa(q, 3, spec, cfg)
        lb = lm.local_kappa(scaled, 3, spec, cfg)
        assert np.allclose(la.values[la.valid], lb.values[lb.valid], atol=1e-10)

    # ERL p-values lie on the grid {k / (s + 1)}
    for s in (19, 99):
        curves = rng.normal(size=(s + 1, 12))
        sorted_ranks, _ = lm.erl_order(curves)
        p_vals = lm.erl_pvalues(sorted_ranks)
        grid = np.arange(1, s + 2) / (s + 1)
        assert all(np.isclose(v, grid).any() for v in p_vals)


# ---------------------------------------------------------------------------
# criteria 3-5: desk-scale simulation studies

def test_criterion_03_scenario_I_calibration(study_I):
    rate = study_I.global_rejection_rate
    frac = study_I.mean_local_significant_fraction
    assert 0.01 <= rate <= 0.12, f"global rejection {rate}"
    assert 0.02 <= frac <= 0.09, f"local significant fraction {frac}"


def test_criterion_03_smoke_preset():
    start = time.monotonic()
    s = run_study("I", replicates=25, permutations=49, intensity=200.0)
    elapsed = time.monotonic() - start
    assert elapsed <= 300.0, f"smoke preset took {elapsed:.0f}s"
    assert 0.0 <= s.global_rejection_rate <= 0.16
    assert 0.0 <= s.mean_local_significant_fraction <= 0.16


def test_criterion_04_scenario_II_power(study_II):
    failures = []
    rate = study_II.global_rejection_rate
    if not 0.25 <= rate <= 0.55:
        failures.append(f"global rejection {rate} outside [0.25, 0.55]")
    det = study_II.structured_detection_rates
    frac_good = float((det >= 0.90).mean())
    if frac_good < 0.95:
        failures.append(
            f">=90% in-disc detection reached in only {frac_good:.2f} of "
            f"replicates (need 0.95; per-point mean {det.mean():.3f})")
    # points farther than r_max from both disc centres stay at the nominal
    # level (Monte-Carlo standard error over the replicate count)
    far_rate = study_II.far_flagged / study_II.far_total
    threshold = ALPHA + 3 * np.sqrt(ALPHA * (1 - ALPHA) / study_II.replicates)
    if far_rate > threshold:
        failures.append(f"far-point flag rate {far_rate:.4f} > {threshold:.4f}")
    assert not failures, "; ".join(failures)


def test_criterion_05_scenarios_III_IV(study_III, study_IV):
    r3 = study_III.global_rejection_rate
    r4 = study_IV.global_rejection_rate
    assert 0.32 <= r3 <= 0.62, f"scenario III rejection {r3}"
    assert 0.28 <= r4 <= 0.58, f"scenario IV rejection {r4}"
    for name, study in (("III", study_III), ("IV", study_IV)):
        det = float(study.structured_detection_rates.mean())
        assert det >= 0.90, f"scenario {name} detection {det:.3f}"


# ---------------------------------------------------------------------------
# criterion 6: ERL ordering against the exhaustive oracle

def test_criterion_06_erl_exhaustive():
    rng = np.random.default_rng(6)
    for s in range(2, 8):
        for _ in range(20):
            n_r = int(rng.integers(2, 7))
            curves = rng.normal(size=(s + 1, n_r))
            if rng.random() < 0.5:
                curves = np.round(curves, 1)
            sorted_ranks, order = lm.erl_order(curves)
            assert order.tolist() == oracles.erl_order(curves)
            assert np.allclose(lm.erl_pvalues(sorted_ranks),
                               oracles.erl_pvalues(curves))
        # observed strictly dominating everything: p = 1 / (s + 1) exactly
        curves = rng.uniform(0, 1, size=(s + 1, 5))
        curves[0] = 2.0
        sorted_ranks, _ = lm.erl_order(curves)
        assert lm.erl_pvalues(sorted_ranks)[0] == 1.0 / (s + 1)


# ---------------------------------------------------------------------------
# criterion 7: network distances and distance-injection equivalence

def test_criterion_07_network_path():
    rng = np.random.default_rng(7)
    w = lm.unit_square()
    pts = rng.uniform(0.05, 0.95, size=(15, 2))
    marks = lm.RealMarks(rng.uniform(0.5, 4.0, 15))
    planar = lm.MarkedPointPattern.planar(w, pts, marks)
    d = planar.pairwise_distances()
    cfg = lm.EstimationConfig(r_grid=np.linspace(0, 0.4, 25)[1:], bandwidth=0.08)

    # a network pattern given the planar distance matrix reproduces the
    # planar curves bitwise
    net = lm.build_network(np.array([[0.0, 0.0], [1.0, 0.0]]), [(0, 1)])
    offs = np.linspace(0.05, 0.95, 15)
    netpat = lm.MarkedPointPattern.on_network(net, np.zeros(15, dtype=int),
                                              offs, marks)
    for i in (0, 7):
        a = lm.local_kappa(planar, i, lm.TestFunctionSpec("stoyan"), cfg,
                           distances=d)
        b = lm.local_kappa_network(netpat, i, lm.TestFunctionSpec("stoyan"),
                                   cfg, distances=d)
        assert np.array_equal(a.values, b.values, equal_nan=True)
        assert np.array_equal(a.valid, b.valid)

    # shortest-path node distances match Floyd-Warshall on 100 random
    # graphs with <= 8 nodes
    for g in range(100):
        n = int(rng.integers(2, 9))
        nodes = rng.uniform(0, 10, size=(n, 2))
        pairs = list(itertools.combinations(range(n), 2))
        rng.shuffle(pairs)
        k = int(rng.integers(1, len(pairs) + 1))
        segs = pairs[:k]
        net = lm.build_network(nodes, segs)
        got = net.node_distances(np.arange(n))
        lengths = [float(np.hypot(*(nodes[u] - nodes[v]))) for u, v in segs]
        want = oracles.floyd_warshall(n, [(u, v, l) for (u, v), l
                                          in zip(segs, lengths)])
        assert np.allclose(got, np.asarray(want), atol=1e-12, equal_nan=True)


# ---------------------------------------------------------------------------
# criterion 8: functional-mark reduction and t-integration accuracy

def test_criterion_08_functional_reduction():
    rng = np.random.default_rng(8)
    w = lm.unit_square()
    pts = rng.uniform(0.05, 0.95, size=(14, 2))
    values = rng.uniform(0.5, 4.0, 14)
    real = lm.MarkedPointPattern.planar(w, pts, lm.RealMarks(values))
    cfg = lm.EstimationConfig(r_grid=np.linspace(0, 0.3, 13)[1:], bandwidth=0.08)
    a, b = 0.2, 1.9
    t_grid = np.linspace(a, b, 11)
    func = real.with_marks(lm.FunctionalMarks(
        t_grid, np.repeat(values[:, None], len(t_grid), axis=1)))
    for kind in KINDS:
        spec = lm.TestFunctionSpec(kind)
        fk = lm.local_kappa_functional(func, 4, spec, cfg)
        rk = lm.local_kappa(real, 4, spec, cfg)
        assert np.allclose(fk.values[fk.valid], (b - a) * rk.values[rk.valid],
                           atol=1e-10)
        gf = lm.global_kappa(func, spec, cfg)
        gr = lm.global_kappa(real, spec, cfg)
        assert np.allclose(gf.values[gf.valid], (b - a) * gr.values[gr.valid],
                           atol=1e-10)

    t = np.linspace(0.0, 1.0, 101)
    surface = lm.PointwiseSurface(r_grid=np.array([1.0]), t_grid=t,
                                  values=t[None, :], valid=np.array([True]))
    assert abs(lm.integrate_over_t(surface).values[0] - 0.5) < 1e-4


# ---------------------------------------------------------------------------
# criterion 9: bitwise reproducibility from the run manifest

def test_criterion_09_manifest_rerun_bitwise(tmp_path):
    runner = CliRunner()
    args = ["study", "--scenario", "II", "--replicates", "4",
            "--permutations", "49", "--intensity", "120",
            "--rsteps", "16", "--bandwidth", "0.05",
            "--seed", str(ACCEPT_SEED)]
    out = tmp_path / "ref"
    res = runner.invoke(cli_main, args + ["--out", str(out)],
                        catch_exceptions=False)
    assert res.exit_code == 0, res.output
    for threads in (1, 2, 4):
        redo = tmp_path / f"redo{threads}"
        res = runner.invoke(cli_main,
                            ["rerun", str(out / "manifest.json"),
                             "--out", str(redo), "--threads", str(threads)],
                            catch_exceptions=False)
        assert res.exit_code == 0, res.output
        for name in ("summary.json", "replicates.csv", "manifest.json"):
            assert (out / name).read_bytes() == (redo / name).read_bytes(), \
                f"{name} differs at threads={threads}"

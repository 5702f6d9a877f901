"""Command-line interface: estimate, envelope, simulate, study, rerun.

Every command writes its outputs plus a manifest.json into --out; the
manifest records the resolved parameters, package version, and input file
digests, and `rerun` reproduces a previous run bitwise from it.

Exit codes: 0 success, 2 malformed input, 3 numeric degeneracy.
"""

from __future__ import annotations

import csv
import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, io
from .envelope import global_envelope_test, local_association_test
from .estimate import EstimationConfig, local_kappa, global_kappa, stoyan_bandwidth
from .exceptions import DegenerateStatisticError, InputDataError
from .geometry import Window
from .pattern import MarkedPointPattern
from .simulate import (
    SCENARIOS,
    MarkLaw,
    ScenarioConfig,
    _replicate_seeds,
    apply_scenario,
    replicate_study,
    rpoispp,
    unit_square,
)
from .testfuncs import CLI_ALIASES, TestFunctionSpec

TESTFN_CHOICES = tuple(CLI_ALIASES)


def _fail(exc: Exception, code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputDataError as exc:
            _fail(exc, 2)
        except DegenerateStatisticError as exc:
            _fail(exc, 3)
    return wrapper


@click.group()
@click.version_option(__version__)
def main():
    """Mark correlation estimation and permutation envelope testing."""


# ---------------------------------------------------------------------------
# shared option plumbing

def pattern_options(fn):
    fn = click.option("--pattern", "pattern_path", required=True,
                      type=click.Path(), help="Pattern CSV.")(fn)
    fn = click.option("--window", "window_path", type=click.Path(),
                      help="Window vertex CSV (planar mode).")(fn)
    fn = click.option("--nodes", "nodes_path", type=click.Path(),
                      help="Network nodes CSV (network mode).")(fn)
    fn = click.option("--edges", "edges_path", type=click.Path(),
                      help="Network edges CSV (network mode).")(fn)
    fn = click.option("--functional", is_flag=True,
                      help="Marks are curves sampled on t_<value> columns.")(fn)
    return fn


def estimation_options(fn):
    fn = click.option("--testfn", type=click.Choice(TESTFN_CHOICES),
                      default="stoyan", show_default=True)(fn)
    fn = click.option("--rmax", type=float, default=None,
                      help="Largest distance (default: quarter of the "
                           "window's shorter side).")(fn)
    fn = click.option("--rsteps", type=int, default=512, show_default=True)(fn)
    fn = click.option("--bandwidth", type=float, default=None,
                      help="Kernel bandwidth (default: 0.15/sqrt(intensity)).")(fn)
    fn = click.option("--kernel",
                      type=click.Choice(("epanechnikov", "gaussian", "box")),
                      default="epanechnikov", show_default=True)(fn)
    return fn


def _load_pattern(params) -> tuple[MarkedPointPattern, list[str]]:
    pattern_path = params["pattern"]
    window_path = params.get("window")
    nodes_path = params.get("nodes")
    edges_path = params.get("edges")
    functional = bool(params.get("functional"))
    network_mode = nodes_path is not None or edges_path is not None
    if network_mode:
        if window_path is not None:
            raise InputDataError("give either --window or --nodes/--edges, not both")
        if nodes_path is None or edges_path is None:
            raise InputDataError("network mode needs both --nodes and --edges")
        net = io.read_network(nodes_path, edges_path)
        pattern = io.read_network_pattern(pattern_path, net, functional=functional)
        return pattern, [pattern_path, nodes_path, edges_path]
    if window_path is None:
        raise InputDataError("planar mode needs --window (or use --nodes/--edges)")
    window = io.read_window(window_path)
    pattern = io.read_planar_pattern(pattern_path, window, functional=functional)
    return pattern, [pattern_path, window_path]


def _make_config(pattern: MarkedPointPattern, params) -> EstimationConfig:
    r_max = params.get("rmax")
    if r_max is None:
        if pattern.is_network:
            span = pattern.network.nodes.max(axis=0) - pattern.network.nodes.min(axis=0)
            r_max = 0.25 * float(span.min() if span.min() > 0 else span.max())
        else:
            r_max = 0.25 * pattern.window.shorter_side()
    bandwidth = params.get("bandwidth")
    if bandwidth is None:
        bandwidth = stoyan_bandwidth(pattern.intensity())
    r_grid = np.linspace(0.0, float(r_max), int(params.get("rsteps", 512)) + 1)[1:]
    return EstimationConfig(r_grid=r_grid, bandwidth=float(bandwidth),
                            kernel=params.get("kernel", "epanechnikov"))


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# estimate

def _run_estimate(params: dict, out: Path):
    pattern, inputs = _load_pattern(params)
    cfg = _make_config(pattern, params)
    spec = TestFunctionSpec(CLI_ALIASES[params["testfn"]])
    which = params.get("local")
    curves = []
    if which is None:
        curves.append(("global", global_kappa(pattern, spec, cfg)))
    else:
        if which == "all":
            indices = range(pattern.n_points)
        else:
            try:
                indices = [int(which)]
            except ValueError:
                raise InputDataError(
                    f"--local must be a point index or 'all', got {which!r}") from None
        from .estimate import local_kappa_functional
        kappa = local_kappa_functional if pattern.is_functional else local_kappa
        d = pattern.pairwise_distances()
        for i in indices:
            curves.append((f"local_{i}", kappa(pattern, i, spec, cfg, distances=d)))
    for name, curve in curves:
        io.write_curve(out / f"{name}.csv", curve)
        io.write_json(out / f"{name}.json", io.curve_to_json(curve))
    io.write_manifest(out, "estimate", params, inputs)
    click.echo(f"wrote {len(curves)} curve(s) to {out}")


@main.command()
@pattern_options
@estimation_options
@click.option("--local", default=None,
              help="Point index or 'all' for per-point curves (default: global).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@handle_errors
def estimate(pattern_path, window_path, nodes_path, edges_path, functional,
             testfn, rmax, rsteps, bandwidth, kernel, local, out):
    """Estimate mark correlation curves (global or per point)."""
    params = {"pattern": pattern_path, "window": window_path,
              "nodes": nodes_path, "edges": edges_path,
              "functional": functional, "testfn": testfn, "rmax": rmax,
              "rsteps": rsteps, "bandwidth": bandwidth, "kernel": kernel,
              "local": local}
    _run_estimate(params, _out_dir(out))


# ---------------------------------------------------------------------------
# envelope

def _run_envelope(params: dict, out: Path, threads: int = 1):
    pattern, inputs = _load_pattern(params)
    cfg = _make_config(pattern, params)
    spec = TestFunctionSpec(CLI_ALIASES[params["testfn"]])
    permutations = int(params.get("permutations", 499))
    alpha = float(params.get("alpha", 0.05))
    seed = params.get("seed")
    seed = int(seed) if seed is not None else None
    if params.get("scope", "global") == "global":
        res = global_envelope_test(pattern, spec, cfg, permutations=permutations,
                                   alpha=alpha, seed=seed)
        io.write_envelope(out / "envelope.csv", res)
        io.write_json(out / "envelope.json", io.envelope_to_json(res))
        click.echo(f"global p-value {res.p_value:.6g} "
                   f"({'significant' if res.significant else 'not significant'} "
                   f"at alpha={alpha})")
    else:
        report = local_association_test(pattern, spec, cfg,
                                        permutations=permutations, alpha=alpha,
                                        seed=seed)
        io.write_local_report(out / "report.csv", report)
        io.write_json(out / "report.json", io.local_report_to_json(report))
        click.echo(f"{int(report.significant.sum())} of {report.n_points} "
                   f"points significant at alpha={alpha}")
    io.write_manifest(out, "envelope", params, inputs)


@main.command()
@pattern_options
@estimation_options
@click.option("--permutations", type=int, default=499, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--scope", type=click.Choice(("global", "local")),
              default="global", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker cap (results do not depend on it).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@handle_errors
def envelope(pattern_path, window_path, nodes_path, edges_path, functional,
             testfn, rmax, rsteps, bandwidth, kernel, permutations, alpha,
             seed, scope, threads, out):
    """Permutation envelope test of mark association (global or per point)."""
    params = {"pattern": pattern_path, "window": window_path,
              "nodes": nodes_path, "edges": edges_path,
              "functional": functional, "testfn": testfn, "rmax": rmax,
              "rsteps": rsteps, "bandwidth": bandwidth, "kernel": kernel,
              "permutations": permutations, "alpha": alpha, "seed": seed,
              "scope": scope}
    _run_envelope(params, _out_dir(out), threads=threads)


# ---------------------------------------------------------------------------
# simulate / study

def _scenario_config(params: dict) -> ScenarioConfig:
    return ScenarioConfig(
        scenario=str(params["scenario"]),
        intensity=float(params.get("intensity", 500.0)),
        window=unit_square(),
        disc_radius=float(params.get("disc_radius", 0.075)),
        band_halfwidth=float(params.get("band_halfwidth", 0.075)),
        sd_is_variance=bool(params.get("sd_is_variance", False)),
    )


def _run_simulate(params: dict, out: Path):
    cfg = _scenario_config(params)
    seed = params.get("seed")
    seed = int(seed) if seed is not None else None
    point_rng, mark_rng, _ = _replicate_seeds(seed, int(params.get("index", 0)))
    points = rpoispp(cfg.intensity, cfg.window, point_rng)
    marks, labels, _ = apply_scenario(points, cfg, mark_rng)
    pattern = MarkedPointPattern.planar(cfg.window, points, marks)
    io.write_pattern(out / "pattern.csv", pattern,
                     extra={"region": [int(v) for v in labels]})
    io.write_window(out / "window.csv", cfg.window)
    io.write_manifest(out, "simulate", params, [])
    click.echo(f"wrote {pattern.n_points} points to {out / 'pattern.csv'}")


@main.command()
@click.option("--scenario", required=True,
              help=f"One of {', '.join(SCENARIOS)}.")
@click.option("--intensity", type=float, default=500.0, show_default=True)
@click.option("--disc-radius", type=float, default=0.075, show_default=True)
@click.option("--band-halfwidth", type=float, default=0.075, show_default=True)
@click.option("--sd-is-variance", is_flag=True,
              help="Read mark-law spread parameters as variances.")
@click.option("--seed", type=int, default=None)
@click.option("--index", type=int, default=0, show_default=True,
              help="Replicate index within the seed stream.")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@handle_errors
def simulate(scenario, intensity, disc_radius, band_halfwidth, sd_is_variance,
             seed, index, out):
    """Draw one marked pattern from a simulation scenario."""
    params = {"scenario": scenario, "intensity": intensity,
              "disc_radius": disc_radius, "band_halfwidth": band_halfwidth,
              "sd_is_variance": sd_is_variance, "seed": seed, "index": index}
    _run_simulate(params, _out_dir(out))


def _parse_global_bandwidth(value):
    if value is None or value == "stoyan":
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InputDataError(
            f"bad global bandwidth {value!r}: expected a number or 'stoyan'"
        ) from None


_STUDY_KEY_TYPES = {
    "scenario": str, "kernel": str, "testfn": str,
    "replicates": int, "permutations": int, "r_steps": int, "seed": int,
    "alpha": float, "intensity": float, "disc_radius": float,
    "band_halfwidth": float, "r_max": float, "bandwidth": float,
    "global_bandwidth": _parse_global_bandwidth,
    "sd_is_variance": lambda v: v.lower() in ("1", "true", "yes"),
}


def _read_study_config(path) -> dict:
    """Flat key=value file; '#' starts a comment."""
    out = {}
    aliases = {"lambda": "intensity", "s": "permutations",
               "rmax": "r_max", "rsteps": "r_steps"}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputDataError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = aliases.get(key, key)
        convert = _STUDY_KEY_TYPES.get(key)
        if convert is None:
            raise InputDataError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = convert(value)
        except ValueError:
            raise InputDataError(
                f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


_REPLICATE_FIELDS = ("replicate", "n_points", "global_p_value",
                     "global_significant", "local_significant_fraction",
                     "n_structured", "structured_detection_rate",
                     "far_total", "far_flagged")


def _run_study(params: dict, out: Path, threads: int = 1):
    cfg = _scenario_config(params)
    seed = params.get("seed")
    seed = int(seed) if seed is not None else None
    est = {}
    for key in ("r_max", "r_steps", "bandwidth", "kernel", "testfn",
                "global_bandwidth"):
        if params.get(key) is not None:
            est[key] = params[key]
    summary = replicate_study(
        cfg, replicates=int(params.get("replicates", 100)),
        permutations=int(params.get("permutations", 99)),
        alpha=float(params.get("alpha", 0.05)), seed=seed, est=est,
        with_local=bool(params.get("with_local", True)), n_jobs=threads)

    rows = []
    for r in summary.per_replicate:
        rows.append([r.get(f, "") if not isinstance(r.get(f), float)
                     else _fmt(r[f]) for f in _REPLICATE_FIELDS])
    _write_rows(out / "replicates.csv", _REPLICATE_FIELDS, rows)
    payload = {
        "scenario": summary.scenario,
        "replicates": summary.replicates,
        "permutations": summary.permutations,
        "alpha": summary.alpha,
        "global_rejection_rate": summary.global_rejection_rate,
        "mean_local_significant_fraction": summary.mean_local_significant_fraction,
        "far_flagged": summary.far_flagged,
        "far_total": summary.far_total,
        "config": summary.config,
    }
    if summary.structured_detection_rates is not None:
        payload["mean_structured_detection_rate"] = float(
            summary.structured_detection_rates.mean())
    io.write_json(out / "summary.json", payload)
    io.write_manifest(out, "study", params, [])
    click.echo(f"global rejection rate {summary.global_rejection_rate:.3f} "
               f"over {summary.replicates} replicates")
    return summary


@main.command()
@click.option("--scenario", default=None, help=f"One of {', '.join(SCENARIOS)}.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="key=value study config file; flags override it.")
@click.option("--replicates", type=int, default=None)
@click.option("--permutations", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--disc-radius", type=float, default=None)
@click.option("--band-halfwidth", type=float, default=None)
@click.option("--sd-is-variance", is_flag=True, default=None)
@click.option("--rmax", "r_max", type=float, default=None)
@click.option("--rsteps", "r_steps", type=int, default=None)
@click.option("--bandwidth", type=float, default=None)
@click.option("--global-bandwidth", default=None,
              help="Bandwidth for the global test only: a number, or "
                   "'stoyan' for the rule of thumb at each replicate's "
                   "intensity. Default: share --bandwidth.")
@click.option("--seed", type=int, default=None)
@click.option("--global-only", is_flag=True,
              help="Skip the per-point local tests.")
@click.option("--smoke", is_flag=True,
              help="Quick preset: 25 replicates, 49 permutations, "
                   "intensity 200.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Parallel replicate workers (results do not depend on it).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@handle_errors
def study(scenario, config_path, replicates, permutations, alpha, intensity,
          disc_radius, band_halfwidth, sd_is_variance, r_max, r_steps,
          bandwidth, global_bandwidth, seed, global_only, smoke, threads, out):
    """Replicate a scenario and aggregate envelope-test rejection rates."""
    params: dict = {"replicates": 100, "permutations": 99, "alpha": 0.05,
                    "intensity": 500.0, "disc_radius": 0.075,
                    "band_halfwidth": 0.075, "sd_is_variance": False,
                    "with_local": True}
    if config_path is not None:
        params.update(_read_study_config(config_path))
    if smoke:
        params.update(replicates=25, permutations=49, intensity=200.0)
    overrides = {"scenario": scenario, "replicates": replicates,
                 "permutations": permutations, "alpha": alpha,
                 "intensity": intensity, "disc_radius": disc_radius,
                 "band_halfwidth": band_halfwidth,
                 "sd_is_variance": sd_is_variance, "r_max": r_max,
                 "r_steps": r_steps, "bandwidth": bandwidth,
                 "global_bandwidth": _parse_global_bandwidth(global_bandwidth),
                 "seed": seed}
    params.update({k: v for k, v in overrides.items() if v is not None})
    if global_only:
        params["with_local"] = False
    if "scenario" not in params:
        raise InputDataError("missing scenario (use --scenario or --config)")
    _run_study(params, _out_dir(out), threads=threads)


# ---------------------------------------------------------------------------
# rerun

_RUNNERS = {"estimate": _run_estimate, "envelope": _run_envelope,
            "simulate": _run_simulate, "study": _run_study}


@main.command()
@click.argument("manifest_path", type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--threads", type=int, default=1, show_default=True)
@handle_errors
def rerun(manifest_path, out, threads):
    """Reproduce a previous run from its manifest.json, bitwise."""
    manifest = io.read_manifest(manifest_path)
    command = manifest["command"]
    runner = _RUNNERS.get(command)
    if runner is None:
        raise InputDataError(f"manifest has unknown command {command!r}")
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists():
            raise InputDataError(f"manifest input missing: {path}")
        if io.sha256_file(path) != digest:
            raise InputDataError(f"manifest input changed since the run: {path}")
    kwargs = {"threads": threads} if command in ("envelope", "study") else {}
    runner(manifest["params"], _out_dir(out), **kwargs)


if __name__ == "__main__":
    main()

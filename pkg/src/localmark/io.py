"""CSV/JSON interchange for patterns, networks, curves and test reports."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .envelope import EnvelopeResult, LocalTestReport
from .estimate import PointwiseSurface, SummaryCurve
from .exceptions import InputDataError
from .geometry import LinearNetwork, Window, build_network
from .pattern import FunctionalMarks, MarkedPointPattern, RealMarks


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise InputDataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    return header, rows[1:]


def _parse_float(path, lineno, field, raw) -> float:
    try:
        return float(raw)
    except ValueError:
        raise InputDataError(f"{path}:{lineno}: bad {field} value {raw!r}") from None


# ---------------------------------------------------------------------------
# geometry

def read_window(path) -> Window:
    header, rows = _read_rows(path)
    if [h.lower() for h in header] != ["x", "y"]:
        raise InputDataError(f"{path}:1: expected header 'x,y'")
    verts = [(_parse_float(path, i + 2, "x", r[0]),
              _parse_float(path, i + 2, "y", r[1])) for i, r in enumerate(rows)]
    return Window(verts)


def write_window(path, window: Window):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in window.vertices:
            w.writerow([_fmt(x), _fmt(y)])


def read_network(nodes_path, edges_path) -> LinearNetwork:
    header, rows = _read_rows(nodes_path)
    if [h.lower() for h in header] != ["id", "x", "y"]:
        raise InputDataError(f"{nodes_path}:1: expected header 'id,x,y'")
    ids, coords = [], []
    for i, r in enumerate(rows):
        if len(r) != 3:
            raise InputDataError(f"{nodes_path}:{i + 2}: expected 3 columns")
        ids.append(r[0].strip())
        coords.append((_parse_float(nodes_path, i + 2, "x", r[1]),
                       _parse_float(nodes_path, i + 2, "y", r[2])))
    index = {nid: k for k, nid in enumerate(ids)}
    if len(index) != len(ids):
        raise InputDataError(f"{nodes_path}: duplicate node ids")

    header, rows = _read_rows(edges_path)
    if [h.lower() for h in header] != ["id", "u", "v"]:
        raise InputDataError(f"{edges_path}:1: expected header 'id,u,v'")
    segments = []
    for i, r in enumerate(rows):
        if len(r) != 3:
            raise InputDataError(f"{edges_path}:{i + 2}: expected 3 columns")
        try:
            segments.append((index[r[1].strip()], index[r[2].strip()]))
        except KeyError as exc:
            raise InputDataError(
                f"{edges_path}:{i + 2}: unknown node id {exc.args[0]!r}") from None
    return build_network(np.asarray(coords), segments)


def write_network(nodes_path, edges_path, net: LinearNetwork):
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for k, (x, y) in enumerate(net.nodes):
            w.writerow([k, _fmt(x), _fmt(y)])
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "u", "v"])
        for k, (u, v) in enumerate(net.segments):
            w.writerow([k, int(u), int(v)])


# ---------------------------------------------------------------------------
# patterns

def _parse_t_header(path, cols: list[str]) -> np.ndarray:
    t_vals = []
    for c in cols:
        if not c.startswith("t_"):
            raise InputDataError(f"{path}:1: expected t_<value> column, got {c!r}")
        t_vals.append(_parse_float(path, 1, "t-grid", c[2:]))
    return np.asarray(t_vals)


def _read_mark_table(path, key_fields: list[str]):
    """Rows of (key columns, marks) for either real or functional marks."""
    header, rows = _read_rows(path)
    header = [h.strip() for h in header]
    nk = len(key_fields)
    if [h.lower() for h in header[:nk]] != key_fields:
        raise InputDataError(
            f"{path}:1: expected header to start with '{','.join(key_fields)}'")
    rest = header[nk:]
    functional = bool(rest) and rest[0].startswith("t_")
    if functional:
        # trailing non-mark columns (labels etc.) are ignored
        nm = 0
        while nm < len(rest) and rest[nm].startswith("t_"):
            nm += 1
        t_grid = _parse_t_header(path, rest[:nm])
    elif rest and rest[0].lower() == "mark":
        nm = 1
    else:
        raise InputDataError(f"{path}:1: expected 'mark' or 't_<value>...' columns")
    keys, marks = [], []
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise InputDataError(f"{path}:{i + 2}: expected {len(header)} columns")
        keys.append([_parse_float(path, i + 2, key_fields[k], r[k]) for k in range(nk)])
        marks.append([_parse_float(path, i + 2, "mark", v) for v in r[nk:nk + nm]])
    keys = np.asarray(keys, dtype=float)
    marks = np.asarray(marks, dtype=float)
    if functional:
        return keys, FunctionalMarks(t_grid, marks)
    return keys, RealMarks(marks[:, 0])


def read_planar_pattern(path, window: Window, functional: bool | None = None
                        ) -> MarkedPointPattern:
    keys, marks = _read_mark_table(path, ["x", "y"])
    if functional is not None and functional != isinstance(marks, FunctionalMarks):
        want = "functional (t_... columns)" if functional else "real (mark column)"
        raise InputDataError(f"{path}: expected {want} marks")
    return MarkedPointPattern.planar(window, keys, marks)


def read_network_pattern(path, net: LinearNetwork, functional: bool | None = None
                         ) -> MarkedPointPattern:
    keys, marks = _read_mark_table(path, ["segment", "offset"])
    if functional is not None and functional != isinstance(marks, FunctionalMarks):
        want = "functional (t_... columns)" if functional else "real (mark column)"
        raise InputDataError(f"{path}: expected {want} marks")
    segments = keys[:, 0]
    if np.any(segments != np.round(segments)):
        raise InputDataError(f"{path}: segment indices must be integers")
    return MarkedPointPattern.on_network(net, segments.astype(np.int64),
                                         keys[:, 1], marks)


def write_pattern(path, pattern: MarkedPointPattern, extra: dict | None = None):
    """Write a pattern CSV in the documented schema (+ optional extra columns)."""
    extra = extra or {}
    if pattern.is_network:
        key_header = ["segment", "offset"]
        key_rows = [[int(s), _fmt(o)]
                    for s, o in zip(pattern.segments, pattern.offsets)]
    else:
        key_header = ["x", "y"]
        key_rows = [[_fmt(x), _fmt(y)] for x, y in pattern.points]
    if pattern.is_functional:
        mark_header = [f"t_{_fmt(t)}" for t in pattern.marks.t_grid]
        mark_rows = [[_fmt(v) for v in row] for row in pattern.marks.curves]
    else:
        mark_header = ["mark"]
        mark_rows = [[_fmt(v)] for v in pattern.marks.values]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(key_header + mark_header + list(extra))
        for i, (kr, mr) in enumerate(zip(key_rows, mark_rows)):
            w.writerow(kr + mr + [extra[c][i] for c in extra])


# ---------------------------------------------------------------------------
# curves, surfaces, reports

def write_curve(path, curve: SummaryCurve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "value", "valid"])
        for r, v, ok in zip(curve.r_grid, curve.values, curve.valid):
            w.writerow([_fmt(r), _fmt(v) if ok else "nan", int(ok)])


def curve_to_json(curve: SummaryCurve) -> dict:
    return {
        "r": [float(x) for x in curve.r_grid],
        "value": [float(v) if ok else None
                  for v, ok in zip(curve.values, curve.valid)],
        "valid": [bool(v) for v in curve.valid],
        "meta": {k: v for k, v in curve.meta.items()},
    }


def write_surface(path, surface: PointwiseSurface):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "t", "value"])
        for i, r in enumerate(surface.r_grid):
            for j, t in enumerate(surface.t_grid):
                v = surface.values[i, j] if surface.valid[i] else float("nan")
                w.writerow([_fmt(r), _fmt(t), _fmt(v)])


def write_envelope(path, res: EnvelopeResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "lower", "upper", "valid"])
        for r, lo, hi, ok in zip(res.r_grid, res.lower, res.upper, res.valid):
            w.writerow([_fmt(r), _fmt(lo) if ok else "nan",
                        _fmt(hi) if ok else "nan", int(ok)])


def envelope_to_json(res: EnvelopeResult) -> dict:
    return {
        "p_value": res.p_value,
        "alpha": res.alpha,
        "significant": bool(res.significant),
        "r": [float(x) for x in res.r_grid],
        "lower": [float(v) if ok else None for v, ok in zip(res.lower, res.valid)],
        "upper": [float(v) if ok else None for v, ok in zip(res.upper, res.valid)],
        "ranges": [{"r_lo": g.r_lo, "r_hi": g.r_hi, "side": g.side}
                   for g in res.ranges],
        "meta": dict(res.meta),
    }


def write_local_report(path, report: LocalTestReport):
    """One row per significant range; points without ranges get one bare row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point_id", "p_value", "significant",
                    "range_lo", "range_hi", "side"])
        for i in range(report.n_points):
            sig = int(report.p_values[i] <= report.alpha)
            ranges = report.ranges[i]
            if not ranges:
                w.writerow([i, _fmt(report.p_values[i]), sig, "", "", ""])
            for g in ranges:
                w.writerow([i, _fmt(report.p_values[i]), sig,
                            _fmt(g.r_lo), _fmt(g.r_hi), g.side])


def local_report_to_json(report: LocalTestReport) -> dict:
    out = {
        "alpha": report.alpha,
        "seed": report.seed,
        "meta": dict(report.meta),
        "points": [
            {
                "point_id": i,
                "p_value": float(report.p_values[i]),
                "significant": bool(report.p_values[i] <= report.alpha),
                "ranges": [{"r_lo": g.r_lo, "r_hi": g.r_hi, "side": g.side}
                           for g in report.ranges[i]],
            }
            for i in range(report.n_points)
        ],
    }
    if report.envelopes is not None:
        out["envelopes"] = [envelope_to_json(e) for e in report.envelopes]
    return out


# ---------------------------------------------------------------------------
# run manifests

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, params: dict, inputs: list) -> Path:
    manifest = {
        "command": command,
        "params": params,
        "version": __version__,
        "inputs": {str(p): sha256_file(p) for p in inputs},
    }
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(path) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    for key in ("command", "params"):
        if key not in manifest:
            raise InputDataError(f"{path}: manifest missing {key!r}")
    return manifest


def write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

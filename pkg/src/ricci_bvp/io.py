"""Run directories: canonical config, diagnostics CSV, snapshots, summary and
a manifest of sha256 digests.

Layout::

    <out>/config.ini          canonical configuration text
    <out>/diagnostics.csv     one row per step, fixed column order
    <out>/snapshots/NNNN.csv  metric (flow) or radial profile (rotsym) samples
    <out>/summary.json        termination, wall time, derived reports
    <out>/manifest.json       version, chart summary, per-file digests
"""
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import load
from .grid import MetricField, read_snapshot, write_snapshot
from .rotsym import RotState, radial_profile

FLOW_COLUMNS = ("t", "dt", "sup_rm", "sup_A", "sup_W_interior", "sup_W_boundary",
                "max_boundary_residual", "min_eig", "conformal_factor_min",
                "conformal_factor_max")
ROT_COLUMNS = ("t", "dt", "sup_rm", "sup_A", "H_face", "max_boundary_residual",
               "min_phi", "min_psi")
PROFILE_COLUMNS = ("r", "phi", "psi", "dspsi", "H_local")
OUTPUT_ROOT_ENV = "RICCI_BVP_OUTPUT_ROOT"


class ManifestError(RuntimeError):
    pass


def output_dir(name):
    """Resolve a run name against ``$RICCI_BVP_OUTPUT_ROOT`` (default: cwd)."""
    p = Path(name)
    if p.is_absolute():
        return p
    return Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / p


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _num(v):
    return f"{float(v):.17g}"


def write_table(path, columns, rows):
    """CSV with a header row; floats with 17 significant digits.

    Rows are dicts (missing keys become nan) or sequences in column order.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            vals = [row.get(c, np.nan) for c in columns] if isinstance(row, dict) else row
            fh.write(",".join(_num(v) for v in vals) + "\n")


def read_table(path):
    """Read a table written by :func:`write_table` as a dict of columns."""
    with open(path) as fh:
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(cols)))
    return {c: data[:, k] for k, c in enumerate(cols)}


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _chart_summary(cfg, traj):
    if hasattr(traj, "chart"):
        return traj.chart.summary()
    geo = cfg["geometry"]
    return {"kind": "radial", "n": geo["n"], "N0": geo["N0"]}


def write_run(out, cfg, traj, extra=None):
    """Write a finished trajectory to ``out``; returns the manifest dict."""
    out = Path(out)
    snap = out / "snapshots"
    snap.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.canonical())
    rotsym = cfg.kind == "rotsym"
    cols = ROT_COLUMNS if rotsym else FLOW_COLUMNS
    write_table(out / "diagnostics.csv", cols, traj.diagnostics)
    if rotsym:
        for k, s in enumerate(traj.states):
            write_table(snap / f"{k:04d}.csv", PROFILE_COLUMNS, radial_profile(s))
    else:
        for k, (t, g) in enumerate(zip(traj.times, traj.snapshots)):
            write_snapshot(snap / f"{k:04d}.csv", g, t)
    write_table(out / "snapshot_times.csv", ("index", "t"),
                [(k, t) for k, t in enumerate(traj.times)])
    summary = {"termination": traj.termination, "message": traj.message,
               "wall_time": traj.wall_time, "final_time": traj.times[-1],
               "n_snapshots": len(traj.times)}
    if rotsym:
        summary.update(flag_time=traj.flag_time, steps=traj.steps,
                       max_boundary_residual=traj.max_boundary_residual)
    if extra:
        summary.update(extra)
    write_json(out / "summary.json", summary)
    return write_manifest(out, cfg, _chart_summary(cfg, traj), traj.termination,
                          traj.wall_time)


def write_manifest(out, cfg, chart_summary, termination, wall_time):
    out = Path(out)
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    man = {"version": __version__, "config_sha256": cfg.digest(), "chart": chart_summary,
           "termination": termination, "wall_time": wall_time,
           "files": {p.relative_to(out).as_posix(): sha256_file(p) for p in files}}
    write_json(out / "manifest.json", man)
    return man


def verify_manifest(out):
    """List of problems with a run directory (empty when every digest matches)."""
    out = Path(out)
    try:
        man = json.loads((out / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read manifest in {out}: {exc}") from None
    problems = []
    for rel, digest in sorted(man["files"].items()):
        p = out / rel
        if not p.is_file():
            problems.append(f"missing file {rel}")
        elif sha256_file(p) != digest:
            problems.append(f"digest mismatch for {rel}")
    listed = set(man["files"])
    for p in out.rglob("*"):
        rel = p.relative_to(out).as_posix()
        if p.is_file() and rel != "manifest.json" and rel not in listed:
            problems.append(f"unlisted file {rel}")
    cfg_path = out / "config.ini"
    if cfg_path.is_file():
        try:
            if load(cfg_path).digest() != man["config_sha256"]:
                problems.append("config digest mismatch")
        except ValueError as exc:
            problems.append(f"config does not parse: {exc}")
    return problems


class StoredTrajectory:
    """A flow trajectory read back from a run directory."""

    def __init__(self, chart, background, times, snapshots, diagnostics, termination):
        self.chart, self.background = chart, background
        self.times, self.snapshots = times, snapshots
        self.diagnostics = diagnostics
        self.termination = termination

    def series(self, key):
        return np.asarray(self.diagnostics[key])


class StoredRotTrajectory:
    def __init__(self, n, times, states, diagnostics, termination):
        self.n, self.times, self.states = n, times, states
        self.diagnostics, self.termination = diagnostics, termination

    def series(self, key):
        return np.asarray(self.diagnostics[key])

    def boundary_series(self, side=None):
        vals = [np.array([s.phi[-1] ** 2, s.psi[-1] ** 2]) for s in self.states]
        return np.array(self.times), np.array(vals)


def load_run(out):
    """Rebuild the configuration and trajectory stored in ``out``."""
    from .harness import build_background, build_chart
    out = Path(out)
    cfg = load(out / "config.ini")
    times = list(read_table(out / "snapshot_times.csv")["t"])
    diag = read_table(out / "diagnostics.csv")
    term = json.loads((out / "summary.json").read_text())["termination"]
    files = [out / "snapshots" / f"{k:04d}.csv" for k in range(len(times))]
    if cfg.kind == "rotsym":
        states = []
        for t, f in zip(times, files):
            prof = read_table(f)
            states.append(RotState(t, prof["phi"], n=cfg["geometry"]["n"], dspsi=prof["dspsi"]))
        return cfg, StoredRotTrajectory(cfg["geometry"]["n"], times, states, diag, term)
    chart = build_chart(cfg)
    snaps = [MetricField.from_tensor(read_snapshot(f, chart)[0]) for f in files]
    bg = build_background(cfg, snaps[0])
    return cfg, StoredTrajectory(chart, bg, times, snaps, diag, term)

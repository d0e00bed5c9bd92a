"""Command-line interface.

Exit status: 0 on success, 2 when a check returns a failing verdict, 1 on
errors (unreadable configuration, missing trajectory, failed sub-run).
Reports go to stdout as JSON with sorted keys.
"""
import argparse
import json
import logging
import sys
import warnings

import numpy as np

from . import __version__

OK, ERROR, VERDICT = 0, 1, 2
COMPLETED = ("horizon", "blowup-flag", "curvature-threshold")

log = logging.getLogger("ricci_bvp")


def _emit(obj):
    from .io import _jsonable
    json.dump(_jsonable(obj), sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def _load_cfg(path, kind=None):
    from .config import ConfigError, load
    cfg = load(path)
    if kind is not None and cfg.kind != kind:
        raise ConfigError([f"[run] kind = {cfg.kind} but this subcommand needs kind = {kind}"])
    return cfg


def _out_dir(cfg, override):
    from .io import output_dir
    return output_dir(override or cfg["run"]["output"])


def cmd_run(args):
    from .harness import run_config
    from .io import write_run
    cfg = _load_cfg(args.config, "flow")
    if cfg["geometry"]["chart"] != "slab":
        raise ValueError("the full flow runs on slab charts; use check-compat for ball data")
    traj = run_config(cfg)
    g0 = traj.snapshots[0].values
    extra = {"final_deviation": float(np.abs(traj.snapshots[-1].values - g0).max()),
             "max_boundary_residual": float(traj.series("max_boundary_residual").max())}
    out = _out_dir(cfg, args.out)
    write_run(out, cfg, traj, extra)
    _emit({"output": str(out), "termination": traj.termination, "message": traj.message,
           "final_time": traj.times[-1], "wall_time": traj.wall_time, **extra})
    return OK if traj.termination in COMPLETED else VERDICT


def cmd_rotsym(args):
    from .harness import run_config
    from .io import write_run
    from .rotsym import hemisphere_exact, relative_error
    from .wellposedness import extension_monitor
    cfg = _load_cfg(args.config, "rotsym")
    traj = run_config(cfg)
    ext = extension_monitor(traj)
    extra = {"extension": ext.to_dict()}
    if cfg["initial"]["family"] == "hemisphere":
        s = traj.final_state
        extra["hemisphere_relative_error"] = relative_error(
            s, hemisphere_exact(s.N0, s.n, s.t)) if 1 - 2 * s.n * s.t > 0 else None
    out = _out_dir(cfg, args.out)
    write_run(out, cfg, traj, extra)
    _emit({"output": str(out), "termination": traj.termination, "steps": traj.steps,
           "final_time": traj.times[-1], "wall_time": traj.wall_time,
           "flag_time": traj.flag_time, **extra})
    return OK if traj.termination in COMPLETED else VERDICT


def cmd_pullback(args):
    from .gauge import integrate_diffeo, pullback_trajectory, ricci_flow_residual
    from .io import load_run, write_table
    cfg, traj = load_run(args.trajectory)
    if cfg.kind != "flow":
        raise ValueError("pullback needs a full-chart flow trajectory")
    diffeo = integrate_diffeo(traj, substeps=args.substeps)
    tp, pulled = pullback_trajectory(traj, diffeo)
    t_in, r_pulled = ricci_flow_residual(tp, pulled)
    _, r_raw = ricci_flow_residual(traj.times, traj.snapshots)
    if args.csv:
        write_table(args.csv, ("t", "raw", "pulled"), zip(t_in, r_raw, r_pulled))
    ok = bool(np.all(r_pulled < r_raw))
    _emit({"times": t_in, "raw": r_raw, "pulled": r_pulled,
           "boundary_drift": diffeo.boundary_drift(),
           "jacobian_det_min": min(diffeo.jacobian_det_min(k) for k in range(len(tp))),
           "pulled_below_raw": ok})
    return OK if ok else VERDICT


def cmd_check_symbol(args):
    from .wellposedness import complementing_check
    rep = complementing_check(args.n, args.samples, args.delta1, args.seed)
    _emit(rep.to_dict())
    return OK if rep.passed else VERDICT


def cmd_check_compat(args):
    from .harness import build_background, build_boundary_data, build_chart, build_initial
    from .wellposedness import compat_check
    cfg = _load_cfg(args.config, "flow")
    chart = build_chart(cfg)
    g0 = build_initial(cfg, chart)
    rep = compat_check(g0, build_boundary_data(cfg, g0), build_background(cfg, g0))
    _emit(rep.to_dict())
    return OK if rep.order0_pass and rep.order1_pass else VERDICT


def cmd_probe_corner(args):
    from .io import load_run
    from .wellposedness import corner_probe
    _, traj = load_run(args.trajectory)
    _emit(corner_probe(traj, args.side).to_dict())
    return OK


def cmd_converge(args):
    from .converge import converge
    cfg = _load_cfg(args.config)
    kw = {} if cfg.kind == "rotsym" else {"tangential": not args.no_tangential}
    rep = converge(cfg, **kw)
    _emit(rep.to_dict())
    return OK


def cmd_verify_manifest(args):
    from .io import verify_manifest
    problems = verify_manifest(args.directory)
    _emit({"directory": args.directory, "problems": problems, "ok": not problems})
    return OK if not problems else VERDICT


def build_parser():
    p = argparse.ArgumentParser(prog="ricci-bvp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="full Ricci-DeTurck run on a slab chart")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (default: [run] output)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("rotsym", help="rotationally symmetric ball run")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_rotsym)

    s = sub.add_parser("pullback", help="Ricci-flow residual before and after the gauge pullback")
    s.add_argument("trajectory", help="run directory written by `run`")
    s.add_argument("--substeps", type=int, default=1)
    s.add_argument("--csv", help="also write the residual table here")
    s.set_defaults(func=cmd_pullback)

    s = sub.add_parser("check-symbol", help="complementing condition on sampled symbols")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--delta1", type=float, default=0.9)
    s.add_argument("--seed", type=int, default=42)
    s.set_defaults(func=cmd_check_symbol)

    s = sub.add_parser("check-compat", help="order 0 and 1 compatibility of a configuration")
    s.add_argument("config")
    s.set_defaults(func=cmd_check_compat)

    s = sub.add_parser("probe-corner", help="corner regularity probe on a stored run")
    s.add_argument("trajectory")
    s.add_argument("--side", default=None)
    s.set_defaults(func=cmd_probe_corner)

    s = sub.add_parser("converge", help="observed order on three nested grids")
    s.add_argument("config")
    s.add_argument("--no-tangential", action="store_true",
                   help="keep Nt fixed (tangentially uniform data)")
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("verify-manifest", help="check the digests of a run directory")
    s.add_argument("directory")
    s.set_defaults(func=cmd_verify_manifest)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ERROR if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())

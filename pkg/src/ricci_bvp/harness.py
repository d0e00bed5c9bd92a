"""Build problems from a :class:`~ricci_bvp.config.RunConfig` and run them."""
import logging

import numpy as np

from . import curvature as cv
from .boundary import (BoundaryDatum, ConstantEta, ConstantGamma, ScaledGamma,
                       TabulatedEta)
from .config import ConfigError, rng, snapshot_schedule
from .data import (flat_ball, hemisphere_ball, random_smooth_metric, round_sphere_ball,
                   warped_slab)
from .flow import FlowProblem, FrozenBackground, TabulatedBackground, run
from .grid import Chart, MetricField, SymTensorField, flat_metric, read_snapshot
from .rotsym import RotProblem, flat_state, hemisphere_state, rot_run

log = logging.getLogger(__name__)

# mean curvature of the face r = 1 for the closed-form radial families
_ROT_H0 = {"flat": lambda n: float(n), "hemisphere": lambda n: 0.0}


def build_chart(cfg):
    geo = cfg["geometry"]
    if geo["chart"] == "slab":
        return Chart.slab(geo["n"], geo["N0"], geo["Nt"], geo["L"])
    if geo["chart"] == "ball":
        return Chart.ball(geo["n"], geo["N0"], dtheta=geo["dtheta"])
    raise ConfigError([f"chart {geo['chart']!r} has no grid chart (use kind = rotsym)"])


def build_initial(cfg, chart):
    ini = cfg["initial"]
    fam = ini["family"]
    if fam == "flat":
        return flat_ball(chart) if chart.kind == "ball" else flat_metric(chart)
    if fam == "hemisphere":
        return hemisphere_ball(chart)
    if fam == "round_sphere":
        return round_sphere_ball(chart)
    if fam == "warped":
        return warped_slab(chart, ini["profile"], ini["amplitude"])
    if fam == "random":
        return random_smooth_metric(chart, rng(cfg), ini["amplitude"], ini["modes"])
    if fam == "snapshot":
        field, _ = read_snapshot(ini["path"], chart)
        return MetricField.from_tensor(field)
    raise ConfigError([f"initial family {fam!r} has no grid metric"])


def bump_direction(chart, amplitude):
    """k with k_00 = amplitude sin^4(pi x0): vanishes to high order at both ends."""
    x0 = chart.node_coords()[..., 0]
    k = np.zeros_like(flat_metric(chart).values)
    k[..., 0] = amplitude * np.sin(np.pi * x0) ** 4
    return k


def build_background(cfg, g0):
    bgc = cfg["background"]
    if bgc["kind"] == "frozen":
        return FrozenBackground(g0)
    T = cfg["run"]["T"]
    k = bump_direction(g0.chart, bgc["amplitude"])
    return TabulatedBackground([0.0, T], [g0, MetricField(g0.chart, g0.values + T * k)])


def _gamma_rule(b, gT0, T):
    if b["gamma"] == "scaled":
        return ScaledGamma.linear(gT0, b["gamma_rate"], T)
    return ConstantGamma(gT0)


def _eta_rule(b, H0, rate_compatible, T):
    rule = b["eta"]
    if rule == "constant":
        return ConstantEta(b["eta_value"])
    if rule == "linear":
        return TabulatedEta.linear(H0, b["eta_rate"], T)
    if rule == "compatible":
        return TabulatedEta.linear(H0, rate_compatible, T)
    return ConstantEta(H0)


def build_boundary_data(cfg, g0):
    """Per-side :class:`BoundaryDatum` built from the initial metric.

    ``induced`` freezes the boundary values of g0; ``compatible`` moves eta at
    the rate H'_{g0}(-2 Ric(g0)), which makes the data first-order compatible
    when gamma is constant.
    """
    chart = g0.chart
    T = cfg["run"]["T"]
    h1 = SymTensorField(chart, "sym2", -2.0 * cv.ricci(g0).values)
    data = {}
    for side in chart.sides:
        b = cfg.boundary(side)
        geom = cv.BoundaryGeometry(g0, side)
        rate = None
        if b["eta"] == "compatible":
            rate = cv.mean_curvature_linearized(g0, h1, side)
        data[side] = BoundaryDatum(_gamma_rule(b, geom.gT, T),
                                   _eta_rule(b, geom.H, rate, T),
                                   meta={"gamma": b["gamma"], "eta": b["eta"]})
    return data


def build_flow_problem(cfg):
    chart = build_chart(cfg)
    g0 = build_initial(cfg, chart)
    run_c = cfg["run"]
    return FlowProblem(g0, build_boundary_data(cfg, g0), build_background(cfg, g0),
                       T=run_c["T"], safety=run_c["safety"],
                       snapshot_every=run_c["snapshot_every"],
                       snapshot_times=snapshot_schedule(cfg))


def build_rot_problem(cfg):
    geo, run_c = cfg["geometry"], cfg["run"]
    fam = cfg["initial"]["family"]
    n, N0 = geo["n"], geo["N0"]
    state = flat_state(N0, n) if fam == "flat" else hemisphere_state(N0, n)
    b = cfg.boundary("outer")
    H0 = _ROT_H0[fam](n)
    rule = b["eta"]
    if rule == "compatible":
        raise ConfigError(["[boundary] eta = compatible is only defined for kind = flow"])
    eta = _eta_rule(b, H0, None, run_c["T"])
    safety = run_c["safety"]
    return RotProblem(state, eta, T=run_c["T"], safety=safety,
                      snapshot_times=snapshot_schedule(cfg),
                      snapshot_every=run_c["snapshot_every"], rm_stop=run_c["rm_stop"])


def run_config(cfg):
    """Run the configured problem and return its trajectory."""
    if cfg.kind == "rotsym":
        return rot_run(build_rot_problem(cfg))
    return run(build_flow_problem(cfg))

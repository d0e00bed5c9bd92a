"""Time integration of the Ricci-DeTurck initial-boundary value problem on a
slab chart.

Each step advances the interior nodes by Heun's method with the right-hand
side :func:`ricci_bvp.curvature.deturck_rhs` and closes both boundary layers
with :func:`ricci_bvp.boundary.solve_boundary` at the new time.
"""
from dataclasses import dataclass, field
import logging
import time
import warnings

import numpy as np

from . import curvature as cv
from .boundary import NonConvergence, SingularJacobian, conformal_factor, solve_boundary, \
    stacked_residual
from .grid import SLAB, DegenerateMetric, MetricField, pack_sym, unpack_sym

log = logging.getLogger(__name__)


class IncompatibleData(ValueError):
    """Initial and boundary data violate the order-0 compatibility conditions."""


# ---------------------------------------------------------------------------
# background families
# ---------------------------------------------------------------------------

class FrozenBackground:
    """g~(t) = g0 for all t."""

    def __init__(self, g0):
        self.g0 = g0

    @property
    def initial(self):
        return self.g0

    def at(self, t):
        return self.g0


class TabulatedBackground:
    """g~(t) interpolated linearly in t between tabulated metrics."""

    def __init__(self, times, metrics):
        self.times = np.asarray(times, dtype=float)
        self.metrics = list(metrics)
        if len(self.times) != len(self.metrics) or len(self.times) < 2:
            raise ValueError("need at least two tabulated background metrics")
        self._cache = {}

    @property
    def initial(self):
        return self.metrics[0]

    def at(self, t):
        if t < 0 or t > self.times[-1] * (1 + 1e-12):
            raise ValueError(f"background undefined at t={t}")
        if t in self._cache:
            return self._cache[t]
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        if w == 0.0:
            out = self.metrics[k]
        elif w == 1.0:
            out = self.metrics[k + 1]
        else:
            out = MetricField(self.metrics[k].chart,
                              (1 - w) * self.metrics[k].values + w * self.metrics[k + 1].values)
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[t] = out
        return out


# ---------------------------------------------------------------------------
# state and step
# ---------------------------------------------------------------------------

@dataclass
class FlowState:
    t: float
    g: MetricField
    gt_now: MetricField
    diagnostics: dict = field(default_factory=dict)


def cfl_dt(g, safety=1.0):
    """safety * h_min^2 / (2 (n+1) max lambda_max(g^{-1}))."""
    if not 0 < safety <= 1:
        raise ValueError("safety factor must lie in (0, 1]")
    chart = g.chart
    lam = np.linalg.eigvalsh(g.inv)[..., -1].max()
    return safety * chart.h_min**2 / (2 * chart.m * lam)


def diagnostics(g, gt, data, t, dt=0.0):
    """Diagnostics of an accepted state."""
    chart = g.chart
    out = {"t": t, "dt": dt}
    out["sup_rm"] = float(cv.riemann_norm(g).max())
    sup_a, bres = 0.0, 0.0
    cmin, cmax = np.inf, -np.inf
    for side in chart.sides:
        bg = cv.BoundaryGeometry(g, side)
        sup_a = max(sup_a, float(bg.A_norm.max()))
        if data is not None:
            bres = max(bres, float(np.abs(stacked_residual(g, gt, data[side], t, side)).max()))
            c = conformal_factor(bg.gT, data[side].gamma.at(t))
            cmin, cmax = min(cmin, float(c.min())), max(cmax, float(c.max()))
    out["sup_A"] = sup_a
    out["max_boundary_residual"] = bres
    out["min_eig"] = g.min_eigenvalue()
    out["conformal_factor_min"] = cmin
    out["conformal_factor_max"] = cmax
    w, _ = cv.deturck_field(g, gt)
    wn = np.sqrt(np.einsum("...i,...j,...ij->...", w.values, w.values, g.full()))
    out["sup_W_interior"] = float(wn[chart.interior_slice()].max())
    out["sup_W_boundary"] = float(max(wn[0].max(), wn[chart.N0 - 1].max()))
    return out


def _close_boundary(gfull, gt, data, t):
    chart = gt.chart
    out = gfull.copy()
    for side in chart.sides:
        res = solve_boundary(out, gt, data[side], t, side)
        k = 0 if side == "lower" else chart.N0 - 1
        out[k] = unpack_sym(res.values, chart.m)
    return out


def step(state, data, background, dt, check_cfl=True):
    """One Heun step followed by the boundary closure at t + dt."""
    g = state.g
    chart = g.chart
    if chart.kind != SLAB:
        raise NotImplementedError("full-chart flow runs on slab charts")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if check_cfl and dt > cfl_dt(g, 1.0) * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability limit {cfl_dt(g, 1.0)}")
    t1 = state.t + dt
    gt1 = background.at(t1)
    inner = chart.interior_slice()
    k1 = cv.deturck_rhs(g, state.gt_now).full()
    g0 = g.full()
    pred = g0.copy()
    pred[inner] = g0[inner] + dt * k1[inner]
    _check_finite(pred)
    pred = _close_boundary(pred, gt1, data, t1)
    gp = MetricField.from_full(chart, pred)
    k2 = cv.deturck_rhs(gp, gt1).full()
    new = pred.copy()
    new[inner] = g0[inner] + 0.5 * dt * (k1[inner] + k2[inner])
    _check_finite(new)
    new = _close_boundary(new, gt1, data, t1)
    gn = MetricField(chart, pack_sym(new))
    return FlowState(t1, gn, gt1, diagnostics(gn, gt1, data, t1, dt))


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError("non-finite metric component produced by the step")


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@dataclass
class FlowProblem:
    """Everything a full-chart run needs."""

    g0: MetricField
    data: dict                     # side -> BoundaryDatum
    background: object = None
    T: float = 0.1
    safety: float = 0.5
    snapshot_every: int = 0        # steps between snapshots (0: only explicit times)
    snapshot_times: tuple = ()
    check_compat: bool = True
    stop_on_blowup: bool = True

    def __post_init__(self):
        if self.background is None:
            self.background = FrozenBackground(self.g0)


@dataclass
class FlowTrajectory:
    chart: object
    background: object
    data: dict
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    termination: str = "horizon"
    message: str = ""
    final_state: FlowState = None
    wall_time: float = 0.0

    def add_snapshot(self, state):
        if self.times and self.times[-1] == state.t:
            return
        self.times.append(state.t)
        self.snapshots.append(state.g)

    def series(self, key):
        return np.array([d[key] for d in self.diagnostics])


def _next_stop(t, T, stops):
    for s in stops:
        if s > t * (1 + 1e-14) + 1e-15:
            return min(s, T)
    return T


def run(problem):
    """Integrate a :class:`FlowProblem` until the horizon, blowup or failure."""
    from .wellposedness import blowup_flag, compat_check
    g0 = problem.g0
    chart = g0.chart
    for side in chart.sides:
        problem.data[side].check_horizon(problem.T)
    if problem.check_compat:
        rep = compat_check(g0, problem.data, problem.background)
        if not rep.order0_pass:
            raise IncompatibleData(f"order-0 compatibility fails: {rep.summary()}")
        if not rep.order1_pass:
            warnings.warn(f"order-1 compatibility fails; expect reduced corner regularity "
                          f"({rep.summary()})", stacklevel=2)
    start = time.perf_counter()
    gt0 = problem.background.at(0.0)
    state = FlowState(0.0, g0, gt0, diagnostics(g0, gt0, problem.data, 0.0))
    traj = FlowTrajectory(chart, problem.background, problem.data)
    traj.diagnostics.append(state.diagnostics)
    traj.add_snapshot(state)
    stops = sorted(set(float(s) for s in problem.snapshot_times if 0 < s <= problem.T))
    nstep = 0
    while state.t < problem.T * (1 - 1e-14):
        dt = cfl_dt(state.g, problem.safety)
        target = _next_stop(state.t, problem.T, stops)
        if state.t + dt >= target * (1 - 1e-12):
            dt = target - state.t
        try:
            state = step(state, problem.data, problem.background, dt)
        except NonConvergence as exc:
            traj.termination, traj.message = "boundary-nonconvergence", str(exc)
            break
        except SingularJacobian as exc:
            traj.termination, traj.message = "boundary-nonconvergence", str(exc)
            break
        except DegenerateMetric as exc:
            traj.termination, traj.message = "degenerate-metric", str(exc)
            break
        except FloatingPointError as exc:
            traj.termination, traj.message = "degenerate-metric", str(exc)
            break
        if abs(state.t - target) <= 1e-12 * max(1.0, target):
            state.t = target
        nstep += 1
        traj.diagnostics.append(state.diagnostics)
        at_stop = any(abs(state.t - s) <= 1e-12 * max(1.0, s) for s in stops)
        if at_stop or (problem.snapshot_every and nstep % problem.snapshot_every == 0):
            traj.add_snapshot(state)
        if problem.stop_on_blowup:
            m = traj.series("sup_rm") + traj.series("sup_A")
            if blowup_flag(m):
                traj.termination = "blowup-flag"
                break
    traj.add_snapshot(state)
    traj.final_state = state
    traj.wall_time = time.perf_counter() - start
    log.info("run finished at t=%.6g after %d steps (%s)", state.t, nstep, traj.termination)
    return traj

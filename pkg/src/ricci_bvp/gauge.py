"""Recovering a Ricci flow from a Ricci-DeTurck trajectory.

The diffeomorphisms solve ``d/dt psi_t(x) = -W(psi_t(x), t)`` with
``psi_{t_start} = id``; then ``psi_t^* g(t)`` solves ``d_t g = -2 Ric(g)``.
The map is stored on the fixed grid as the image point of every node.
"""
from dataclasses import dataclass, field

import numpy as np

from . import curvature as cv
from .grid import SLAB, MetricField, diff, interp_values, pack_sym, unpack_sym


class TrajectoryGap(ValueError):
    """The trajectory does not cover the requested interval."""


class DomainExit(RuntimeError):
    def __init__(self, node, t, point):
        self.node, self.t, self.point = node, t, point
        super().__init__(f"node {node} left the chart at t={t:.6g} (image {point})")


class DegenerateJacobian(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampling a grid field at displaced points
# ---------------------------------------------------------------------------

class FieldSampler:
    """Evaluate a raw grid array at points near the nodes.

    ``method="taylor"`` expands about the nearest node with grid derivatives
    up to ``order`` (1 or 2); the result is smooth in the displacement, which
    keeps the curvature of pulled-back metrics free of grid-scale kinks.
    ``method="linear"`` uses multilinear interpolation.
    """

    def __init__(self, chart, values, method="taylor", order=2, parity=None):
        if method not in ("taylor", "linear"):
            raise ValueError(f"unknown sampling method {method!r}")
        self.chart, self.method, self.order = chart, method, order
        self.values = np.asarray(values, dtype=float)
        if method == "taylor":
            m = chart.m
            self.d1 = [diff(chart, self.values, k, 1, parity) for k in range(m)]
            self.d2 = None
            if order >= 2:
                self.d2 = [[diff(chart, self.d1[k], l, 1, parity) for l in range(m)]
                           for k in range(m)]

    def _nearest(self, pts):
        chart = self.chart
        idx, off = [], []
        for a in range(chart.m):
            c = chart.coords(a)
            h = chart.spacings[a]
            j = np.rint((pts[..., a] - c[0]) / h).astype(np.int64)
            if chart.axis_kind(a) == "periodic":
                off.append(pts[..., a] - (c[0] + j * h))
                j = np.mod(j, c.size)
            else:
                j = np.clip(j, 0, c.size - 1)
                off.append(pts[..., a] - c[j])
            idx.append(j)
        return tuple(idx), off

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        if self.method == "linear":
            flat = pts.reshape(-1, self.chart.m)
            out = interp_values(self.chart, self.values, flat)
            return out.reshape(pts.shape[:-1] + out.shape[1:])
        idx, off = self._nearest(pts)
        comp = self.values.ndim - len(self.chart.shape)
        exp = (Ellipsis,) + (None,) * comp
        out = self.values[idx].copy()
        for k in range(self.chart.m):
            out += off[k][exp] * self.d1[k][idx]
        if self.d2 is not None:
            for k in range(self.chart.m):
                for l in range(self.chart.m):
                    out += 0.5 * (off[k] * off[l])[exp] * self.d2[k][l][idx]
        return out


# ---------------------------------------------------------------------------
# diffeomorphisms
# ---------------------------------------------------------------------------

@dataclass
class DiffeoField:
    """Image points psi_t(x) of every node, one array per time sample.

    Tangential coordinates of slab charts are stored unwrapped, so the
    displacement ``psi - x`` is a periodic function.
    """

    chart: object
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)

    def identity(self):
        return self.chart.node_coords()

    def displacement(self, k):
        return self.positions[k] - self.identity()

    def at_time(self, t, rtol=1e-12):
        for k, s in enumerate(self.times):
            if abs(s - t) <= rtol * max(1.0, abs(t)):
                return self.positions[k]
        raise KeyError(f"no diffeomorphism sample at t={t}")

    def jacobian(self, k):
        """d_i psi^a = delta + d_i (psi - x)^a by finite differences."""
        chart = self.chart
        disp = self.displacement(k)
        J = np.stack([diff(chart, disp, i, 1) for i in range(chart.m)], axis=-1)
        return J + np.eye(chart.m)                   # [..., a, i]

    def jacobian_det_min(self, k):
        return float(np.linalg.det(np.swapaxes(self.jacobian(k), -1, -2)).min())

    def boundary_drift(self):
        """max over boundary nodes and samples of |psi_t(x) - x|."""
        chart = self.chart
        ends = [0, chart.N0 - 1] if chart.kind == SLAB else [chart.N0 - 1]
        out = 0.0
        for k in range(len(self.times)):
            d = self.displacement(k)
            out = max(out, max(float(np.abs(d[e]).max()) for e in ends))
        return out


def _w_field(g, gt):
    w, _ = cv.deturck_field(g, gt)
    return w.values


def deturck_vector_series(trajectory):
    """DeTurck vector field W at every stored snapshot."""
    bg = trajectory.background
    return [_w_field(g, bg.at(t)) for t, g in zip(trajectory.times, trajectory.snapshots)]


def _check_inside(chart, pts, t, tol=1e-9):
    x = pts[..., 0]
    lo, hi = (0.0, 1.0) if chart.kind == SLAB else (0.0, chart.coords(0)[chart.N0 - 1])
    bad = (x < lo - tol) | (x > hi + tol)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DomainExit(node, t, pts[node])
    for a in range(1, chart.m):
        if chart.axis_kind(a) != "periodic":
            c = chart.coords(a)
            if np.any((pts[..., a] < c[0] - tol) | (pts[..., a] > c[-1] + tol)):
                node = tuple(int(i) for i in np.argwhere(
                    (pts[..., a] < c[0] - tol) | (pts[..., a] > c[-1] + tol))[0])
                raise DomainExit(node, t, pts[node])


def integrate_diffeo(trajectory, t_start=0.0, t_end=None, substeps=1, method="taylor",
                     w_series=None):
    """RK4 integration of d/dt psi = -W(psi, t) with psi(t_start) = id.

    W is sampled in space by :class:`FieldSampler` and interpolated linearly
    in time between consecutive snapshots.  One sample of psi is stored per
    snapshot time in [t_start, t_end].
    """
    chart = trajectory.chart
    times = np.asarray(trajectory.times, dtype=float)
    t_end = times[-1] if t_end is None else t_end
    tol = 1e-12 * max(1.0, abs(t_end))
    if t_start < times[0] - tol or t_end > times[-1] + tol or t_end < t_start:
        raise TrajectoryGap(f"trajectory covers [{times[0]}, {times[-1]}], "
                            f"requested [{t_start}, {t_end}]")
    k0 = int(np.flatnonzero(np.abs(times - t_start) <= tol)[0]) if np.any(
        np.abs(times - t_start) <= tol) else None
    if k0 is None:
        raise TrajectoryGap(f"no snapshot at t_start={t_start}")
    k1 = int(np.flatnonzero(times <= t_end + tol)[-1])
    ws = w_series if w_series is not None else deturck_vector_series(trajectory)
    samplers = {}

    def sampler(k):
        if k not in samplers:
            samplers[k] = FieldSampler(chart, ws[k], method, order=2)
        return samplers[k]

    def W(k, s, pts):
        # linear in time on [t_k, t_{k+1}], s in [0, 1]
        if s == 0.0:
            return sampler(k)(pts)
        if s == 1.0:
            return sampler(k + 1)(pts)
        return (1 - s) * sampler(k)(pts) + s * sampler(k + 1)(pts)

    psi = chart.node_coords().copy()
    out = DiffeoField(chart, [float(times[k0])], [psi.copy()])
    for k in range(k0, k1):
        dt_all = times[k + 1] - times[k]
        if dt_all <= 0:
            raise TrajectoryGap("snapshot times must increase")
        dt = dt_all / substeps
        for j in range(substeps):
            s0 = j / substeps
            sh = (j + 0.5) / substeps
            s1 = (j + 1) / substeps
            t = times[k] + j * dt
            a1 = -W(k, s0, psi)
            p2 = psi + 0.5 * dt * a1
            _check_inside(chart, p2, t + 0.5 * dt)
            a2 = -W(k, sh, p2)
            p3 = psi + 0.5 * dt * a2
            _check_inside(chart, p3, t + 0.5 * dt)
            a3 = -W(k, sh, p3)
            p4 = psi + dt * a3
            _check_inside(chart, p4, t + dt)
            a4 = -W(k, s1, p4)
            psi = psi + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
            _check_inside(chart, psi, t + dt)
        out.times.append(float(times[k + 1]))
        out.positions.append(psi.copy())
        for stale in [q for q in samplers if q < k]:
            del samplers[stale]
    return out


def pullback_metric(psi, g, k=None, method="taylor"):
    """(psi^* g)_ij(x) = d_i psi^a d_j psi^b g_ab(psi(x)).

    ``psi`` is a :class:`DiffeoField` with sample index ``k`` (default: last)
    or a raw array of image points.
    """
    chart = g.chart
    if isinstance(psi, DiffeoField):
        k = len(psi.times) - 1 if k is None else k
        pts = psi.positions[k]
        J = psi.jacobian(k)
    else:
        pts = np.asarray(psi, dtype=float)
        tmp = DiffeoField(chart, [0.0], [pts])
        J = tmp.jacobian(0)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        node = tuple(int(i) for i in np.argwhere(det <= 0)[0])
        raise DegenerateJacobian(f"diffeomorphism Jacobian not positive at node {node}")
    gs = FieldSampler(chart, g.values, method, order=2)(pts)
    gfull = unpack_sym(gs, chart.m)
    out = np.einsum("...ai,...bj,...ab->...ij", J, J, gfull)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return MetricField(chart, pack_sym(out))


def pullback_trajectory(trajectory, diffeo, method="taylor"):
    """Pulled-back metrics at the sample times of ``diffeo``."""
    out = []
    for k, t in enumerate(diffeo.times):
        j = int(np.argmin(np.abs(np.asarray(trajectory.times) - t)))
        out.append(pullback_metric(diffeo, trajectory.snapshots[j], k, method))
    return list(diffeo.times), out


def ricci_flow_residual(times, metrics, interior=True):
    """sup |d_t g + 2 Ric(g)| per inner sample time.

    ``d_t`` is the centred three-point difference on the (possibly
    non-uniform) sample times.  Only nodes advanced by the interior update are
    included when ``interior`` is set.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 3 or len(metrics) != len(times):
        raise ValueError("the residual needs at least three time samples")
    chart = metrics[0].chart
    sl = chart.interior_slice() if interior else slice(None)
    if chart.kind == SLAB and interior:
        sl = slice(1, chart.N0 - 1)
    res = []
    for k in range(1, len(times) - 1):
        a = times[k] - times[k - 1]
        b = times[k + 1] - times[k]
        dg = (-b / (a * (a + b)) * metrics[k - 1].values
              + (b - a) / (a * b) * metrics[k].values
              + a / (b * (a + b)) * metrics[k + 1].values)
        r = dg + 2.0 * cv.ricci(metrics[k]).values
        res.append(float(np.abs(r[sl]).max()))
    return times[1:-1], np.array(res)

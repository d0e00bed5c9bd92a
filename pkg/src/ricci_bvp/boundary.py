"""Boundary data and the nonlinear boundary system W = 0, H = eta, [g^T] = [gamma].

At every boundary node the unknowns are the (n+1)(n+2)/2 packed metric
components.  The stacked residual has the gauge part (n+1 components of the
one-form W), the mean-curvature part (1) and the independent entries of the
gamma-traceless conformal residual (n(n+1)/2 - 1; the trace direction is left
free).  Every residual is a pointwise function of the boundary jet of the
metric, which is what the Newton solver differentiates.
"""
from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .curvature import (christoffel_jet, deturck_oneform_jet, mean_curvature_local,
                        metric_boundary_jet)
from .grid import SLAB, diff_boundary, n_packed, pack_sym, unpack_sym


class NonConvergence(RuntimeError):
    """Newton iteration for the boundary system failed."""

    def __init__(self, side, node, residual, iterations=None):
        super().__init__(f"boundary Newton solve on side {side!r} did not converge: "
                         f"max residual {residual:.3e} at node {node}"
                         + (f" after {iterations} iterations" if iterations is not None else ""))
        self.side = side
        self.node = node
        self.residual = residual
        self.iterations = iterations


class SingularJacobian(RuntimeError):
    """The boundary Jacobian could not be factorised."""


class TabulationError(ValueError):
    """A tabulated rule was queried outside its time range."""


def residual_layout(n):
    """Sizes of the (gauge, mean, conformal) residual blocks for fibre dimension n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gauge, mean, conf = n + 1, 1, n * (n + 1) // 2 - 1
    assert gauge + mean + conf == (n + 1) * (n + 2) // 2
    return gauge, mean, conf


def _check_time(t, t_max):
    if t < -1e-14 or (t_max is not None and t > t_max * (1 + 1e-12) + 1e-14):
        raise TabulationError(f"time {t} outside tabulated range [0, {t_max}]")


def _interp_table(times, values, t):
    times = np.asarray(times, dtype=float)
    _check_time(t, times[-1])
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    w = (t - times[k]) / (times[k + 1] - times[k])
    w = min(max(w, 0.0), 1.0)
    return (1 - w) * values[k] + w * values[k + 1]


# ---------------------------------------------------------------------------
# gamma rules
# ---------------------------------------------------------------------------

class ConstantGamma:
    """gamma(t) = gamma0."""

    t_max = None

    def __init__(self, gamma0):
        self.gamma0 = np.asarray(gamma0, dtype=float)
        _check_spd(self.gamma0)

    def at(self, t):
        _check_time(t, self.t_max)
        return self.gamma0


class ScaledGamma:
    """gamma(t) = lambda(t) gamma0 with lambda tabulated and interpolated linearly."""

    def __init__(self, gamma0, times, lambdas):
        self.gamma0 = np.asarray(gamma0, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.lambdas = np.asarray(lambdas, dtype=float)
        if np.any(self.lambdas <= 0):
            raise ValueError("scaling factors must be positive")
        _check_spd(self.gamma0)
        self.t_max = float(self.times[-1])

    @classmethod
    def linear(cls, gamma0, rate, t_max):
        """lambda(t) = 1 + rate t on [0, t_max] (exact under linear interpolation)."""
        return cls(gamma0, [0.0, t_max], [1.0, 1.0 + rate * t_max])

    def at(self, t):
        return _interp_table(self.times, self.lambdas, t) * self.gamma0


class TabulatedGamma:
    """gamma(t) interpolated linearly between tabulated arrays."""

    def __init__(self, times, gammas):
        self.times = np.asarray(times, dtype=float)
        self.gammas = np.asarray(gammas, dtype=float)
        for gm in self.gammas:
            _check_spd(gm)
        self.t_max = float(self.times[-1])

    def at(self, t):
        return _interp_table(self.times, self.gammas, t)


def _check_spd(gm):
    try:
        np.linalg.cholesky(gm)
    except np.linalg.LinAlgError:
        raise ValueError("gamma is not positive definite") from None


# ---------------------------------------------------------------------------
# eta rules
# ---------------------------------------------------------------------------

class ConstantEta:
    t_max = None

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)

    def at(self, t, x=None, gT=None, gTi=None):
        _check_time(t, self.t_max)
        return self.value


class TabulatedEta:
    """eta(x, t) tabulated at sample times (scalar or per-node arrays)."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.t_max = float(self.times[-1])

    @classmethod
    def linear(cls, eta0, rate, t_max):
        eta0 = np.asarray(eta0, dtype=float)
        rate = np.asarray(rate, dtype=float)
        return cls([0.0, t_max], [eta0 + 0 * rate, eta0 + rate * t_max])

    def at(self, t, x=None, gT=None, gTi=None):
        return _interp_table(self.times, self.values, t)


class InducedMetricEta:
    """eta = fn(x, t, gT, gT^{-1}) evaluated per boundary node."""

    t_max = None

    def __init__(self, fn):
        self.fn = fn

    def at(self, t, x=None, gT=None, gTi=None):
        _check_time(t, self.t_max)
        return np.asarray(self.fn(x, t, gT, gTi), dtype=float)


@dataclass
class BoundaryDatum:
    """Conformal class family and mean-curvature rule on one boundary side."""

    gamma: object
    eta: object
    meta: dict = field(default_factory=dict)

    @property
    def t_max(self):
        tms = [r.t_max for r in (self.gamma, self.eta) if r.t_max is not None]
        return min(tms) if tms else None

    def check_horizon(self, T):
        if self.t_max is not None and self.t_max < T:
            raise TabulationError(f"boundary data tabulated up to {self.t_max} < horizon {T}")


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def conformal_full(gT, gamma):
    """g^T - (tr_gamma g^T / n) gamma."""
    n = gT.shape[-1]
    gam_inv = np.linalg.inv(gamma)
    tr = np.einsum("...ab,...ab->...", gam_inv, gT)
    return gT - (tr / n)[..., None, None] * gamma


def conformal_factor(gT, gamma):
    n = gT.shape[-1]
    return np.einsum("...ab,...ab->...", np.linalg.inv(gamma), gT) / n


def conformal_entries(C):
    """Independent entries: packed upper triangle without the last diagonal."""
    return pack_sym(C)[..., :-1]


def _boundary_coords(chart, side):
    x = chart.node_coords()
    if chart.kind == SLAB:
        return x[0] if side == "lower" else x[chart.N0 - 1]
    xb = x[chart.N0 - 1].copy()
    xb[..., 0] = 1.0
    return xb


def stacked_residual_jet(gb, dgb, gam_bg, gamma_now, eta_rule, t, sigma, xb):
    gi = np.linalg.inv(gb)
    w = deturck_oneform_jet(gb, gi, dgb, gam_bg)
    H = mean_curvature_local(gb, gi, dgb, sigma)
    gT = gb[..., 1:, 1:]
    eta = eta_rule.at(t, xb, gT, np.linalg.inv(gT))
    conf = conformal_entries(conformal_full(gT, gamma_now))
    return np.concatenate([w, (H - eta)[..., None], conf], axis=-1)


def conformal_residual(g, gamma_now, side):
    gb, _ = metric_boundary_jet(g, side)
    return conformal_full(gb[..., 1:, 1:], np.asarray(gamma_now, dtype=float))


def mean_residual(g, datum, t, side):
    chart = g.chart
    gb, dgb = metric_boundary_jet(g, side)
    H = mean_curvature_local(gb, np.linalg.inv(gb), dgb, chart.side_sign(side))
    gT = gb[..., 1:, 1:]
    return H - datum.eta.at(t, _boundary_coords(chart, side), gT, np.linalg.inv(gT))


def gauge_residual(g, gt, side):
    gb, dgb = metric_boundary_jet(g, side)
    tb, dtb = metric_boundary_jet(gt, side)
    gam_bg = christoffel_jet(np.linalg.inv(tb), dtb)
    return deturck_oneform_jet(gb, np.linalg.inv(gb), dgb, gam_bg)


def stacked_residual(g, gt, datum, t, side):
    """(gauge, mean, conformal) residual stacked per boundary node."""
    chart = g.chart
    gb, dgb = metric_boundary_jet(g, side)
    tb, dtb = metric_boundary_jet(gt, side)
    gam_bg = christoffel_jet(np.linalg.inv(tb), dtb)
    return stacked_residual_jet(gb, dgb, gam_bg, datum.gamma.at(t), datum.eta, t,
                                chart.side_sign(side), _boundary_coords(chart, side))


# ---------------------------------------------------------------------------
# Newton solve
# ---------------------------------------------------------------------------

@dataclass
class BoundarySolveResult:
    values: np.ndarray          # packed boundary-node metric values
    iterations: int
    residual: float


class _SideProblem:
    """Residual of one slab side as a function of the packed boundary values."""

    def __init__(self, chart, gfull, gt, datum, t, side):
        if chart.kind != SLAB:
            raise NotImplementedError("the boundary Newton solve runs on slab charts")
        self.chart = chart
        self.side = side
        self.sigma = chart.side_sign(side)
        self.m = chart.m
        h = chart.h0
        if side == "lower":
            a1, a2 = gfull[1], gfull[2]
            self.c_self = -3.0 / (2 * h)
            self.d0_rest = (4 * a1 - a2) / (2 * h)
        else:
            k = chart.N0 - 1
            a1, a2 = gfull[k - 1], gfull[k - 2]
            self.c_self = 3.0 / (2 * h)
            self.d0_rest = (-4 * a1 + a2) / (2 * h)
        tb, dtb = metric_boundary_jet(gt, side)
        self.gam_bg = christoffel_jet(np.linalg.inv(tb), dtb)
        self.gamma_now = datum.gamma.at(t)
        self.eta = datum.eta
        self.t = t
        self.xb = _boundary_coords(chart, side)

    def jet(self, u):
        gb = unpack_sym(u, self.m)
        d0 = self.c_self * gb + self.d0_rest
        parts = [d0] + [diff_boundary(self.chart, gb, a) for a in range(1, self.m)]
        return gb, np.stack(parts, axis=-3)

    def residual_from_jet(self, gb, dgb):
        return stacked_residual_jet(gb, dgb, self.gam_bg, self.gamma_now, self.eta,
                                    self.t, self.sigma, self.xb)

    def residual(self, u):
        gb, dgb = self.jet(u)
        return self.residual_from_jet(gb, dgb)

    def jacobian(self, u):
        chart = self.chart
        m, P = self.m, n_packed(self.m)
        bshape = u.shape[:-1]
        nb = int(np.prod(bshape))
        gb, dgb = self.jet(u)
        r0 = self.residual_from_jet(gb, dgb)
        vjet = np.concatenate([u[..., None, :], pack_sym(dgb)], axis=-2)   # (B, m+1, P)

        def eval_jet(vj):
            g_ = unpack_sym(vj[..., 0, :], m)
            d_ = unpack_sym(vj[..., 1:, :], m)
            return self.residual_from_jet(g_, d_)

        dF = np.empty(bshape + (m + 1, P, P))        # [..., slot, eq, comp]
        for slot in range(m + 1):
            for c in range(P):
                step = 1e-7 * (1.0 + np.abs(vjet[..., slot, c]))
                vp = vjet.copy()
                vp[..., slot, c] += step
                dF[..., slot, :, c] = (eval_jet(vp) - r0) / step[..., None]
        local = dF[..., 0, :, :] + self.c_self * dF[..., 1, :, :]
        idx = np.arange(nb).reshape(bshape)
        rows, cols, vals = [], [], []
        eq = np.arange(P)

        def add(block, target):
            rr = (idx[..., None, None] * P + eq[:, None]).repeat(P, axis=-1)
            cc = (target[..., None, None] * P + eq[None, :]).repeat(P, axis=-2)
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(block.ravel())

        add(local, idx)
        for a in range(1, m):
            coef = dF[..., 1 + a, :, :] / (2 * chart.ht)
            add(coef, np.roll(idx, -1, axis=a - 1))
            add(-coef, np.roll(idx, 1, axis=a - 1))
        J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nb * P, nb * P)).tocsc()
        return J, r0


def solve_boundary(g, gt, datum, t, side, tol=1e-10, maxiter=50, guess=None):
    """Damped Newton solve of the stacked boundary residual on one slab side.

    ``g`` supplies the interior layers (as a full array or MetricField); the
    initial guess is its current boundary layer unless ``guess`` is given.
    """
    chart = gt.chart
    gfull = g.full() if hasattr(g, "full") else np.asarray(g)
    prob = _SideProblem(chart, gfull, gt, datum, t, side)
    layer = gfull[0] if side == "lower" else gfull[chart.N0 - 1]
    u = pack_sym(layer).copy() if guess is None else np.array(guess, dtype=float)

    def norms(r):
        return float(np.max(np.abs(r))), float(np.sqrt(np.sum(r * r)))

    def safe_residual(v):
        try:
            np.linalg.cholesky(unpack_sym(v, chart.m))
        except np.linalg.LinAlgError:
            return None
        r = prob.residual(v)
        return r if np.all(np.isfinite(r)) else None

    r = safe_residual(u)
    if r is None:
        raise NonConvergence(side, None, np.inf, 0)
    rmax, r2 = norms(r)
    it = 0
    while rmax > tol:
        if it >= maxiter:
            node = np.unravel_index(int(np.argmax(np.abs(r).max(axis=-1))), r.shape[:-1])
            raise NonConvergence(side, tuple(int(k) for k in node), rmax, it)
        J, r = prob.jacobian(u)
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                delta = spla.spsolve(J, -r.ravel())
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise SingularJacobian(f"boundary Jacobian on side {side!r} is singular") from exc
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian(f"boundary Jacobian on side {side!r} is singular")
        delta = delta.reshape(u.shape)
        lam = 1.0
        while True:
            trial = u + lam * delta
            rt = safe_residual(trial)
            if rt is not None and norms(rt)[1] < r2:
                break
            if lam <= 2.0**-20:
                if rt is None:
                    raise NonConvergence(side, None, rmax, it + 1)
                break
            lam *= 0.5
        u, r = trial, rt
        rmax, r2 = norms(r)
        it += 1
    return BoundarySolveResult(u, it, rmax)

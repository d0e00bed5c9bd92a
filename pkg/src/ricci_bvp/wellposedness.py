"""Well-posedness checks: the complementing condition of the linearised boundary
problem, compatibility of the data at the corner, a corner-regularity probe
and the curvature extension monitor.
"""
from dataclasses import dataclass, field

import numpy as np

from . import curvature as cv
from . import kernels
from .boundary import _boundary_coords, conformal_full, conformal_factor
from .grid import BALL, SymTensorField

# ---------------------------------------------------------------------------
# principal symbol of the frozen-coefficient boundary problem
# ---------------------------------------------------------------------------


@dataclass
class SymbolSystem:
    """Boundary symbol over the unknowns (h00, h01 .. h0n, phi)."""

    n: int
    p: complex
    zeta: np.ndarray
    tau_hat: complex
    matrix: np.ndarray

    @property
    def degenerate(self):
        return self.tau_hat == 0

    @property
    def weight(self):
        """Parabolic weight (|p| + |zeta|^2)^((n+2)/2)."""
        return (abs(self.p) + float(self.zeta @ self.zeta)) ** ((self.n + 2) / 2)

    def det(self):
        return kernels.lu_det(self.matrix)

    def normalized_det(self):
        w = self.weight
        return abs(self.det()) / w if w > 0 else 0.0

    def rank(self, rtol=1e-12):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > rtol * max(s[0], 1e-300)))


def tau_hat(p, zeta):
    """i sqrt(p + |zeta|^2) on the principal branch, so Im tau_hat >= 0."""
    zz = float(np.dot(zeta, zeta))
    return 1j * np.sqrt(complex(p) + zz)


def symbol_matrix(n, p, zeta, side_convention="lower"):
    """Assemble the (n+2) x (n+2) boundary symbol.

    Rows: the trace row of the gauge condition, the n tangential gauge rows
    and the mean-curvature row, after the conformal condition has reduced the
    tangential block to ``h_ab = phi delta_ab``.  With ``side_convention =
    'upper'`` the normal direction is reversed, which flips the sign of every
    ``tau_hat`` entry.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if zeta.shape != (n,):
        raise ValueError(f"zeta must have length n={n}")
    if side_convention not in ("lower", "upper"):
        raise ValueError("side_convention must be 'lower' or 'upper'")
    th = tau_hat(p, zeta)
    t = th if side_convention == "lower" else -th
    M = np.zeros((n + 2, n + 2), dtype=complex)
    # trace row:  i t h00 + i zeta.h0 - (i/2) t (h00 + n phi)
    M[0, 0] = 0.5j * t
    M[0, 1:n + 1] = 1j * zeta
    M[0, n + 1] = -0.5j * t * n
    # tangential rows:  i t h0mu + i zeta_mu phi - (i/2) zeta_mu (h00 + n phi)
    for mu in range(n):
        M[1 + mu, 0] = -0.5j * zeta[mu]
        M[1 + mu, 1 + mu] = 1j * t
        M[1 + mu, n + 1] = 1j * zeta[mu] * (1 - 0.5 * n)
    # mean-curvature row:  i t n phi - 2 i zeta.h0
    M[n + 1, 1:n + 1] = -2j * zeta
    M[n + 1, n + 1] = 1j * t * n
    return SymbolSystem(n, complex(p), zeta, th, M)


def elimination_chain(sys, rtol=1e-12):
    """Pivots of the back-substitution h00 -> phi -> h0mu.

    The trace row plus half the mean-curvature row isolates ``(i/2) tau h00``;
    substituting ``h0mu`` from the tangential rows leaves
    ``phi (p n + 2 (n-1) |zeta|^2)``.  The chain succeeds when every pivot is
    nonzero relative to the natural scale.
    """
    n, M = sys.n, sys.matrix
    row = M[0] + 0.5 * M[n + 1]
    pivots = {"h00": row[0]}
    zz = float(sys.zeta @ sys.zeta)
    pivots["phi"] = sys.p * n + 2 * (n - 1) * zz
    pivots["h0mu"] = M[1, 1] if n >= 1 else 0.0
    scale = abs(sys.p) + zz
    ok = (abs(pivots["h00"]) > rtol * np.sqrt(scale) and abs(pivots["phi"]) > rtol * scale
          and abs(pivots["h0mu"]) > rtol * np.sqrt(scale))
    # the isolated row must really have no other entries
    resid = float(np.max(np.abs(row[1:])))
    return {"pivots": pivots, "succeeds": bool(ok),
            "isolation_residual": resid}


SAMPLE_KINDS = ("p=0", "imaginary", "parabola", "interior")


@dataclass
class ComplementingReport:
    n: int
    num_samples: int
    delta1: float
    seed: int
    min_normalized_det: float
    failures: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    threshold: float = 1e-12

    @property
    def passed(self):
        return not self.failures

    def to_dict(self):
        return {"n": self.n, "num_samples": self.num_samples, "delta1": self.delta1,
                "seed": self.seed, "min_normalized_det": self.min_normalized_det,
                "min_normalized_det_hex": float(self.min_normalized_det).hex(),
                "threshold": self.threshold, "num_failures": len(self.failures),
                "failures": self.failures, "excluded": self.excluded,
                "samples": self.samples, "verdict": "PASS" if self.passed else "FAIL"}


def _draw_sample(rng, kind, n, delta1):
    mag = 10.0 ** rng.uniform(-2.0, 2.0)
    d = rng.normal(size=n)
    zeta = mag * d / np.linalg.norm(d)
    zz = mag * mag
    pmax = 100.0 * zz
    if kind == 0:
        p = 0.0 + 0.0j
    elif kind == 1:
        p = 1j * rng.uniform(-pmax, pmax)
    elif kind == 2:
        re = -delta1 * zz
        im_max = np.sqrt(max(pmax**2 - re**2, 0.0))
        p = complex(re, rng.uniform(-im_max, im_max))
    else:
        re = rng.uniform(-delta1 * zz, pmax)
        im_max = np.sqrt(max(pmax**2 - re**2, 0.0))
        p = complex(re, rng.uniform(-im_max, im_max))
    return p, zeta


def complementing_check(n, num_samples=100, delta1=0.9, rng_seed=42, threshold=1e-12):
    """Sample the admissible set Re p >= -delta1 |zeta|^2 and test the symbol.

    Sample kinds cycle through p = 0, purely imaginary p, p on the parabola
    and p inside it.  ``|zeta|`` is log-uniform on [1e-2, 1e2] and
    ``|p| <= 100 |zeta|^2``.  A sample fails when the normalised determinant
    is at most ``threshold``; samples with ``tau_hat = 0`` are excluded.
    """
    if not 0 < delta1 < 1:
        raise ValueError("delta1 must lie in (0, 1)")
    if n < 1 or num_samples < 1:
        raise ValueError("need n >= 1 and at least one sample")
    rng = np.random.default_rng(rng_seed)
    rep = ComplementingReport(n, num_samples, delta1, rng_seed, np.inf, threshold=threshold)
    for k in range(num_samples):
        kind = k % 4
        p, zeta = _draw_sample(rng, kind, n, delta1)
        rep.samples.append(_evaluate(n, p, zeta, k, kind, rep))
    if not np.isfinite(rep.min_normalized_det):
        rep.min_normalized_det = 0.0
    return rep


def _evaluate(n, p, zeta, k, kind, rep):
    sys = symbol_matrix(n, p, zeta)
    entry = {"index": k, "kind": SAMPLE_KINDS[kind], "p": [p.real, p.imag],
             "zeta": [float(z) for z in zeta]}
    if sys.degenerate:
        entry["status"] = "excluded"
        rep.excluded.append(k)
        return entry
    nd = sys.normalized_det()
    entry["normalized_det"] = nd
    rep.min_normalized_det = min(rep.min_normalized_det, nd)
    if nd <= rep.threshold:
        entry["status"] = "fail"
        rep.failures.append(k)
    else:
        entry["status"] = "ok"
    return entry


def check_sample(n, p, zeta, threshold=1e-12):
    """Status of a single (p, zeta): 'excluded', 'fail' or 'ok'."""
    rep = ComplementingReport(n, 1, 0.5, -1, np.inf, threshold=threshold)
    return _evaluate(n, complex(p), np.atleast_1d(np.asarray(zeta, float)), 0, 3, rep)


# ---------------------------------------------------------------------------
# compatibility at the corner
# ---------------------------------------------------------------------------

COMPAT_DT = 1e-6


@dataclass
class CompatReport:
    """Residuals of the order 0 and order 1 compatibility conditions per side."""

    order0_mean: dict
    order0_conf: dict
    order1_mean: dict
    order1_conf: dict
    gauge_alignment: dict
    thresholds: dict

    def _max(self, table):
        return max(float(np.max(np.abs(v))) for v in table.values())

    @property
    def order0_pass(self):
        return (self._max(self.order0_mean) <= self.thresholds["order0_mean"]
                and self._max(self.order0_conf) <= self.thresholds["order0_conf"])

    @property
    def order1_mean_pass(self):
        return self._max(self.order1_mean) <= self.thresholds["order1"]

    @property
    def order1_conf_pass(self):
        return self._max(self.order1_conf) <= self.thresholds["order1"]

    @property
    def order1_pass(self):
        return self.order1_mean_pass and self.order1_conf_pass

    def to_dict(self):
        def verdict(ok):
            return "PASS" if ok else "FAIL"
        return {
            "order0_mean": self._max(self.order0_mean),
            "order0_conf": self._max(self.order0_conf),
            "order1_mean": self._max(self.order1_mean),
            "order1_conf": self._max(self.order1_conf),
            "order0": verdict(self.order0_pass),
            "order1_mean_verdict": verdict(self.order1_mean_pass),
            "order1_conf_verdict": verdict(self.order1_conf_pass),
            "order1": verdict(self.order1_pass),
            "gauge_alignment": self.gauge_alignment,
            "thresholds": self.thresholds,
        }

    def summary(self):
        d = self.to_dict()
        return (f"order0 {d['order0']} (mean {d['order0_mean']:.3e}, conf "
                f"{d['order0_conf']:.3e}); order1 {d['order1']} (mean "
                f"{d['order1_mean']:.3e}, conf {d['order1_conf']:.3e})")


def _fd3(f0, f1, f2, dt):
    return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * dt)


def compat_check(g0, data, background=None, dt=COMPAT_DT):
    """Order 0 and order 1 compatibility of (g0, boundary data, background).

    ``data`` maps side names to :class:`BoundaryDatum`.  The background must
    satisfy ``g~(0) = g0`` exactly; a mismatch raises ``ValueError``.  On ball
    charts only the centre node of the angular patch is reported.
    """
    chart = g0.chart
    align = {"background_equals_g0": True, "background_dt_zero": True,
             "background_dt_max": 0.0}
    if background is not None:
        gt0 = background.at(0.0)
        if not np.array_equal(gt0.values, g0.values):
            raise ValueError("background violates g~(0) = g0")
        gtd1, gtd2 = background.at(dt), background.at(2 * dt)
        dgt = _fd3(gt0.values, gtd1.values, gtd2.values, dt)
        align["background_dt_max"] = float(np.max(np.abs(dgt)))
        align["background_dt_zero"] = align["background_dt_max"] <= 1e-8
    h1 = cv.ricci(g0)
    h1 = SymTensorField(chart, "sym2", -2.0 * h1.values)
    sel = chart.report_index()
    o0m, o0c, o1m, o1c = {}, {}, {}, {}
    scale = 0.0
    for side in chart.sides:
        datum = data[side]
        bg = cv.BoundaryGeometry(g0, side)
        gT = bg.gT
        xb = _boundary_coords(chart, side)
        eta0 = datum.eta.at(0.0, xb, gT, np.linalg.inv(gT))
        scale = max(scale, float(np.max(np.abs(bg.H))), float(np.max(np.abs(eta0))))
        o0m[side] = np.broadcast_to(bg.H - eta0, bg.H.shape)[sel]
        gam0 = np.asarray(datum.gamma.at(0.0), dtype=float)
        o0c[side] = conformal_full(gT, gam0)[sel]
        scale = max(scale, float(np.max(np.abs(gT))))
        # first-order conditions
        h1b, _ = cv.field_boundary_jet(h1, side)
        h1T = h1b[..., 1:, 1:]
        etas = []
        for k in range(3):
            t = k * dt
            gTk = gT + t * h1T
            etas.append(np.asarray(datum.eta.at(t, xb, gTk, np.linalg.inv(gTk)), dtype=float))
        eta_dot = _fd3(*etas, dt)
        Hp = cv.mean_curvature_linearized(g0, h1, side)
        o1m[side] = np.broadcast_to(eta_dot - Hp, Hp.shape)[sel]
        gams = [np.asarray(datum.gamma.at(k * dt), dtype=float) for k in range(3)]
        gam_dot = _fd3(*gams, dt)
        c = conformal_factor(gT, gam0)
        o1c[side] = conformal_full(h1T - c[..., None, None] * gam_dot, gam0)[sel]
    thresholds = {"order0_mean": 1e-8 * (1 + scale), "order0_conf": 1e-8 * (1 + scale),
                  "order1": 1e-6}
    return CompatReport(o0m, o0c, o1m, o1c, align, thresholds)


# ---------------------------------------------------------------------------
# corner regularity probe
# ---------------------------------------------------------------------------

def boundary_time_series(trajectory, side=None):
    """(times, boundary metric values) from a full-chart or radial trajectory."""
    if hasattr(trajectory, "boundary_series"):
        return trajectory.boundary_series(side)
    chart = trajectory.chart
    side = side or chart.sides[0]
    if chart.kind == BALL:
        k, sel = chart.N0 - 1, chart.report_index()
    else:
        k, sel = (0 if side == "lower" else chart.N0 - 1), (Ellipsis,)
    vals = [np.asarray(g.values[k])[sel] for g in trajectory.snapshots]
    return np.asarray(trajectory.times, dtype=float), np.asarray(vals)


def geometric_times(T, levels):
    """Snapshot times T 2^-k, k = levels .. 0, ascending."""
    return tuple(T * 2.0 ** (-k) for k in range(levels, -1, -1))


@dataclass
class CornerProbe:
    t: np.ndarray
    Q1: np.ndarray
    D1: np.ndarray
    q1_exponent: float
    d1_exponent: float
    at_roundoff: bool
    growth: bool
    bounded: bool

    def to_dict(self):
        return {"t": self.t.tolist(), "Q1": self.Q1.tolist(), "D1": self.D1.tolist(),
                "q1_exponent": self.q1_exponent, "holder_exponent": self.d1_exponent,
                "at_roundoff": self.at_roundoff, "growth": self.growth,
                "bounded": self.bounded}


def _fit_exponent(t, y):
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def corner_probe(trajectory, side=None, rtol=1e-12, floor=1e-13):
    """Second time differences of the boundary metric on dyadic scales.

    ``Q1(t) = |g(2t) - 2 g(t) + g(0)|_inf / t^2`` stays bounded when the
    second time derivative is bounded at the corner; its log-log slope is
    reported as the growth exponent.  The first difference
    ``D1(t) = |g(t) - g(0)|_inf`` gives a Hoelder-type exponent.
    """
    times, vals = boundary_time_series(trajectory, side)
    if len(times) < 3 or times[0] != 0.0:
        raise ValueError("corner probe needs snapshots at t = 0 and dyadic times")
    ts, q, d = [], [], []
    g0 = vals[0]
    for i, t in enumerate(times[1:], start=1):
        j = np.flatnonzero(np.abs(times - 2 * t) <= rtol * 2 * t)
        if j.size == 0:
            continue
        sec = float(np.max(np.abs(vals[j[0]] - 2 * vals[i] + g0)))
        ts.append(t)
        q.append(sec / t**2)
        d.append(float(np.max(np.abs(vals[i] - g0))))
    if len(ts) < 2:
        raise ValueError("corner probe needs at least two dyadic pairs (t, 2t)")
    ts, q, d = np.array(ts), np.array(q), np.array(d)
    noise = floor * (1.0 + float(np.max(np.abs(g0))))
    sec_abs = q * ts**2
    at_roundoff = bool(np.all(sec_abs <= noise))
    if at_roundoff:
        qe = 0.0
    else:
        keep = sec_abs > noise
        qe = _fit_exponent(ts[keep], q[keep]) if keep.sum() >= 2 else 0.0
    de = _fit_exponent(ts, d) if np.all(d > noise) else float("nan")
    return CornerProbe(ts, q, d, qe, de, at_roundoff, bool(qe < -0.4), bool(qe >= -0.1))


# ---------------------------------------------------------------------------
# extension monitor
# ---------------------------------------------------------------------------

BLOWUP_FACTOR = 100.0
BLOWUP_FLOOR = 1e-6


def blowup_index(M, factor=BLOWUP_FACTOR, floor=BLOWUP_FLOOR):
    """First index where M >= factor M[0], M >= floor and M rose over the last three samples."""
    M = np.asarray(M, dtype=float)
    if M.size < 3:
        return None
    thresh = max(factor * M[0], floor)
    for k in range(2, M.size):
        if M[k] >= thresh and M[k] > M[k - 1] > M[k - 2]:
            return k
    return None


def blowup_flag(M, factor=BLOWUP_FACTOR, floor=BLOWUP_FLOOR):
    return blowup_index(M, factor, floor) is not None


class blowup_flag_incremental:
    """Streaming version of :func:`blowup_flag`; call with each new sample."""

    def __init__(self, factor=BLOWUP_FACTOR, floor=BLOWUP_FLOOR):
        self.factor, self.floor = factor, floor
        self.M0 = None
        self.last = []

    def __call__(self, value):
        value = float(value)
        if self.M0 is None:
            self.M0 = value
        self.last = (self.last + [value])[-3:]
        if len(self.last) < 3:
            return False
        a, b, c = self.last
        return c >= max(self.factor * self.M0, self.floor) and c > b > a


@dataclass
class ExtensionReport:
    t: np.ndarray
    M: np.ndarray
    flag: bool
    t_flag: float

    def to_dict(self):
        return {"flag": self.flag, "t_flag": self.t_flag, "M0": float(self.M[0]),
                "M_max": float(np.max(self.M)), "samples": int(self.M.size)}


def extension_monitor(trajectory):
    """M(t) = sup |Rm| + sup |A| from the diagnostics and the blowup flag."""
    t = trajectory.series("t")
    M = trajectory.series("sup_rm") + trajectory.series("sup_A")
    k = blowup_index(M)
    return ExtensionReport(t, M, k is not None, None if k is None else float(t[k]))

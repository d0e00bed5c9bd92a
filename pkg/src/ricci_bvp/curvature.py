"""Differential geometry on a chart: connection, curvature, boundary geometry,
the DeTurck vector field and the Ricci-DeTurck right-hand side.

Most operators come in two layers.  The ``*_jet`` helpers are pointwise
algebra on first jets ``(g, dg)`` with ``dg[..., k, i, j] = d_k g_ij``; they
are shared by the field-level operators and by the boundary Newton solver,
which perturbs jets directly.  The field-level functions take
:class:`~ricci_bvp.grid.MetricField` objects and apply the stencils of
:mod:`ricci_bvp.grid`.
"""
import numpy as np

from . import kernels
from .grid import (SymTensorField, MetricField, boundary_jet, boundary_value, diff,
                   radial_parity, pack_sym)


class ConnectionField:
    """Christoffel symbols ``gamma[..., k, i, j] = Gamma^k_ij`` on a chart."""

    def __init__(self, chart, gamma):
        self.chart = chart
        self.gamma = gamma

    def parity(self):
        return radial_parity((self.chart.m,) * 3)


def _cached(g, key, fn):
    cache = g.__dict__.setdefault("_geom_cache", {})
    if key not in cache:
        cache[key] = fn()
    return cache[key]


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

def metric_jet(g):
    """First derivatives of a metric field, shape ``shape + (m, m, m)``."""
    def build():
        chart = g.chart
        full = g.full()
        par = radial_parity((chart.m, chart.m))
        return np.stack([diff(chart, full, k, 1, par) for k in range(chart.m)], axis=-3)
    return _cached(g, "dg", build)


def christoffel_jet(gi, dg):
    """Gamma^r_pq from the inverse metric and the first jet."""
    return kernels.christoffel(gi, dg)


def inverse_jet(gi, dg):
    """d_k g^{ij} = -g^{ia} d_k g_ab g^{bj}."""
    return -np.einsum("...ia,...kab,...bj->...kij", gi, dg, gi)


# ---------------------------------------------------------------------------
# connection and curvature
# ---------------------------------------------------------------------------

def christoffel(g):
    """Christoffel symbols of ``g`` with the chart stencils."""
    return ConnectionField(g.chart, _cached(
        g, "gamma", lambda: christoffel_jet(g.inv, metric_jet(g))))


def _gamma_derivative(g):
    def build():
        chart = g.chart
        gam = christoffel(g).gamma
        par = radial_parity((chart.m,) * 3)
        return np.stack([diff(chart, gam, k, 1, par) for k in range(chart.m)], axis=-4)
    return _cached(g, "dgamma", build)


def ricci_full(g):
    """Ricci tensor as a full (..., m, m) array, symmetrised."""
    def build():
        gam = christoffel(g).gamma
        dgam = _gamma_derivative(g)
        return _sym(kernels.ricci_from_gamma(gam, dgam))
    return _cached(g, "ricci", build)


def ricci(g):
    """Ric_ij = d_k G^k_ij - d_i G^k_kj + G^k_kl G^l_ij - G^k_il G^l_kj."""
    return SymTensorField(g.chart, "sym2", pack_sym(ricci_full(g)))


def riemann_lowered(g):
    """R_abcd = g_ae R^e_bcd with R^a_bcd = d_c G^a_db - d_d G^a_cb + ..."""
    def build():
        gam = christoffel(g).gamma
        dgam = _gamma_derivative(g)            # [..., c, a, d, b] = d_c G^a_db
        up = (np.einsum("...cadb->...abcd", dgam) - np.einsum("...dacb->...abcd", dgam)
              + np.einsum("...ace,...edb->...abcd", gam, gam)
              - np.einsum("...ade,...ecb->...abcd", gam, gam))
        return np.einsum("...ae,...ebcd->...abcd", g.full(), up)
    return _cached(g, "riemann", build)


def riemann_norm(g):
    """Pointwise tensor norm |Rm|_g."""
    rm = riemann_lowered(g)
    return np.sqrt(np.maximum(kernels.rm_norm_sq(g.inv, rm), 0.0))


def scalar_curvature(g):
    return np.einsum("...ij,...ij->...", g.inv, ricci_full(g))


# ---------------------------------------------------------------------------
# boundary geometry on jets
# ---------------------------------------------------------------------------

def normal_jet(gi, dg, sigma):
    """Outward unit normal and its tangential derivatives.

    ``sigma = -1`` on a face modelled by ``{x0 >= 0}`` (nu^i = -g^{0i}/sqrt(g^00)),
    ``+1`` on the opposite face.  Returns ``nu[..., i]`` and
    ``dnu[..., alpha-1, i] = d_alpha nu^i`` for alpha = 1..n, computed by the
    chain rule from the metric jet.
    """
    g00 = gi[..., 0, 0]
    if np.any(~(g00 > 0)):
        raise ValueError("g^00 <= 0 at a boundary node: invalid metric")
    s = np.sqrt(g00)
    nu = sigma * gi[..., 0, :] / s[..., None]
    dgi = inverse_jet(gi, dg[..., 1:, :, :])
    dnu = sigma * (dgi[..., 0, :] / s[..., None, None]
                   - 0.5 * gi[..., None, 0, :] * (dgi[..., 0, 0] / s[..., None] ** 3)[..., None])
    return nu, dnu


def mean_curvature_local(g, gi, dg, sigma):
    """H from the coordinate formula for 2H in terms of the metric jet."""
    s = np.sqrt(gi[..., 0, 0])
    nu = sigma * gi[..., 0, :] / s[..., None]
    gTi = np.linalg.inv(g[..., 1:, 1:])
    term1 = np.einsum("...ab,...i,...iab->...", gTi, nu, dg[..., :, 1:, 1:])
    g0 = gi[..., 0, :]                                    # g^{0k}
    # bracket[..., alpha, k, l] for tangential alpha
    b1 = 2.0 * np.einsum("...l,...ak->...akl", g0, gi[..., 1:, :]) / s[..., None, None, None]
    b2 = (np.einsum("...l,...k,...a->...akl", g0, g0, g0[..., 1:])
          / s[..., None, None, None] ** 3)
    c = np.einsum("...ab,...b->...a", gTi, g[..., 0, 1:])
    b3 = np.einsum("...a,...l,...k->...akl", c, g0, g0) / s[..., None, None, None]
    bracket = b1 - b2 + b3
    term2 = -sigma * np.einsum("...akl,...akl->...", bracket, dg[..., 1:, :, :])
    return 0.5 * (term1 + term2)


def lie_tangential_jet(g, dg, nu, dnu):
    """Tangential block of L_nu g from jets (normal derivative of nu not needed)."""
    t1 = np.einsum("...k,...kab->...ab", nu, dg[..., :, 1:, 1:])
    t2 = np.einsum("...kb,...ak->...ab", g[..., :, 1:], dnu)
    return t1 + t2 + np.swapaxes(t2, -1, -2)


def second_form_jet(g, gi, dg, sigma):
    """A = 1/2 (L_nu g)^T on the boundary, shape (..., n, n)."""
    nu, dnu = normal_jet(gi, dg, sigma)
    return 0.5 * lie_tangential_jet(g, dg, nu, dnu)


def tangential_christoffel_jet(gT, dgT):
    """Christoffel symbols of the induced metric from its tangential jet."""
    return christoffel_jet(np.linalg.inv(gT), dgT)


def mean_curvature_linearized_jet(g, dg, h, dh, sigma):
    """H'_g(h) = 1/2 [tr_{gT} nabla_N h + 2 delta(h(N)^T) - h(N,N) H(g)].

    ``delta`` is the formal adjoint of the symmetrised covariant derivative on
    the boundary, i.e. ``delta = -div_gT`` on one-forms.
    """
    gi = np.linalg.inv(g)
    gT = g[..., 1:, 1:]
    gTi = np.linalg.inv(gT)
    nu, dnu = normal_jet(gi, dg, sigma)
    gam = christoffel_jet(gi, dg)
    # (nabla_nu h)_ab for tangential a, b
    corr = np.einsum("...rka,...rb->...kab", gam[..., :, :, 1:], h[..., :, 1:])
    nab = dh[..., :, 1:, 1:] - corr - np.swapaxes(corr, -1, -2)
    term1 = np.einsum("...ab,...k,...kab->...", gTi, nu, nab)
    # X_b = nu^i h_ib on the boundary and its tangential derivatives
    X = np.einsum("...i,...ib->...b", nu, h[..., :, 1:])
    dX = (np.einsum("...ai,...ib->...ab", dnu, h[..., :, 1:])
          + np.einsum("...i,...aib->...ab", nu, dh[..., 1:, :, 1:]))
    gamT = christoffel_jet(gTi, dg[..., 1:, 1:, 1:])
    divX = np.einsum("...ab,...ab->...", gTi,
                     dX - np.einsum("...dab,...d->...ab", gamT, X))
    hnn = np.einsum("...i,...j,...ij->...", nu, nu, h)
    H = mean_curvature_local(g, gi, dg, sigma)
    return 0.5 * (term1 - 2.0 * divX - hnn * H)


def deturck_oneform_jet(g, gi, dg, gamma_bg):
    """W_l = g_lr g^{pq} (Gamma(g)^r_pq - Gamma_bg^r_pq) from jets."""
    wv = np.einsum("...pq,...rpq->...r", gi, christoffel_jet(gi, dg) - gamma_bg)
    return np.einsum("...lr,...r->...l", g, wv)


# ---------------------------------------------------------------------------
# boundary geometry on fields
# ---------------------------------------------------------------------------

def metric_boundary_jet(g, side):
    """(g, dg) traced on a boundary component, full storage."""
    def build():
        chart = g.chart
        val, d = boundary_jet(chart, g.full(), side)
        return _sym(val), _sym(d)
    return _cached(g, ("bjet", side), build)


def field_boundary_jet(h, side):
    full = h.full() if h.rank == "sym2" else h.values
    val, d = boundary_jet(h.chart, full, side)
    if h.rank == "sym2":
        return _sym(val), _sym(d)
    return val, d


class BoundaryGeometry:
    """Normal, induced metric, second fundamental form and H on one side."""

    def __init__(self, g, side):
        chart = g.chart
        sigma = chart.side_sign(side)
        gb, dgb = metric_boundary_jet(g, side)
        gib = np.linalg.inv(gb)
        self.side = side
        self.nu, self.dnu = normal_jet(gib, dgb, sigma)
        self.gT = gb[..., 1:, 1:]
        self.A = _sym(0.5 * lie_tangential_jet(gb, dgb, self.nu, self.dnu))
        self.H = mean_curvature_local(gb, gib, dgb, sigma)
        gTi = np.linalg.inv(self.gT)
        self.A_norm = np.sqrt(np.maximum(
            np.einsum("...ac,...bd,...ab,...cd->...", gTi, gTi, self.A, self.A), 0.0))


def outward_normal(g, side):
    chart = g.chart
    gb, dgb = metric_boundary_jet(g, side)
    nu, _ = normal_jet(np.linalg.inv(gb), dgb, chart.side_sign(side))
    return nu


def mean_curvature(g, side, return_both=False):
    """Mean curvature on a boundary side by the coordinate formula.

    Route (ii), 1/2 tr_{gT} L_nu g built from a normal field on the whole
    chart and :func:`lie_derivative_metric`, is evaluated as well when
    ``return_both`` is set.
    """
    chart = g.chart
    sigma = chart.side_sign(side)
    gb, dgb = metric_boundary_jet(g, side)
    H1 = mean_curvature_local(gb, np.linalg.inv(gb), dgb, sigma)
    if not return_both:
        return H1
    gi = g.inv
    nu_full = sigma * gi[..., 0, :] / np.sqrt(gi[..., 0, 0])[..., None]
    lie = lie_derivative_metric(g, SymTensorField(chart, "vector", nu_full)).full()
    lieT = boundary_value(chart, lie, side)[..., 1:, 1:]
    H2 = 0.5 * np.einsum("...ab,...ab->...", np.linalg.inv(gb[..., 1:, 1:]), lieT)
    return H1, H2


def mean_curvature_linearized(g, hdir, side):
    chart = g.chart
    gb, dgb = metric_boundary_jet(g, side)
    hb, dhb = field_boundary_jet(hdir, side)
    return mean_curvature_linearized_jet(gb, dgb, hb, dhb, chart.side_sign(side))


def second_form_norm(g, side):
    return BoundaryGeometry(g, side).A_norm


# ---------------------------------------------------------------------------
# Bianchi operator, DeTurck field, Lie derivative
# ---------------------------------------------------------------------------

def _field_derivatives(field):
    chart = field.chart
    full = field.full()
    comp = full.shape[len(chart.shape):]
    par = radial_parity(comp)
    return np.stack([diff(chart, full, k, 1, par) for k in range(chart.m)],
                    axis=len(chart.shape))


def bianchi(g, u):
    """beta_g(u)_l = g^ij (d_i u_jl - u_rl G^r_ij - u_jr G^r_il) - 1/2 d_l (g^ij u_ij)."""
    chart = g.chart
    gi = g.inv
    gam = christoffel(g).gamma
    uf = u.full()
    du = _field_derivatives(u)                       # [..., k, i, j]
    div = (np.einsum("...ij,...ijl->...l", gi, du)
           - np.einsum("...ij,...rl,...rij->...l", gi, uf, gam)
           - np.einsum("...ij,...jr,...ril->...l", gi, uf, gam))
    tr = np.einsum("...ij,...ij->...", gi, uf)
    dtr = np.stack([diff(chart, tr, k, 1) for k in range(chart.m)], axis=-1)
    return SymTensorField(chart, "covector", div - 0.5 * dtr)


def deturck_field(g, gt):
    """DeTurck field W(g, gt).  Returns ``(vector, one_form)`` fields."""
    chart = g.chart
    if gt.chart != chart:
        raise ValueError("metrics live on different charts")
    diffgam = christoffel(g).gamma - christoffel(gt).gamma
    wv = np.einsum("...pq,...rpq->...r", g.inv, diffgam)
    wl = np.einsum("...lr,...r->...l", g.full(), wv)
    return SymTensorField(chart, "vector", wv), SymTensorField(chart, "covector", wl)


def lie_derivative_metric(g, X):
    """(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k."""
    chart = g.chart
    x = X.values
    dx = _field_derivatives(X)                       # [..., i, k] = d_i X^k
    a = np.einsum("...kj,...ik->...ij", g.full(), dx)
    out = np.einsum("...k,...kij->...ij", x, metric_jet(g)) + a + np.swapaxes(a, -1, -2)
    return SymTensorField(chart, "sym2", pack_sym(out))


# ---------------------------------------------------------------------------
# Ricci-DeTurck right-hand side
# ---------------------------------------------------------------------------

def quadratic_term(gi, dg):
    """R(g, dg) of the background-connection form with a flat chart connection."""
    t1 = 0.5 * np.einsum("...ab,...pq,...ipa,...jqb->...ij", gi, gi, dg, dg)
    t2 = np.einsum("...ab,...pq,...ajp,...qib->...ij", gi, gi, dg, dg)
    t3 = np.einsum("...ab,...pq,...ajp,...biq->...ij", gi, gi, dg, dg)
    t4 = np.einsum("...ab,...pq,...jpa,...biq->...ij", gi, gi, dg, dg)
    t5 = np.einsum("...ab,...pq,...ipa,...bjq->...ij", gi, gi, dg, dg)
    return t1 + t2 - t3 - t4 - t5


def metric_hessian(g):
    """d_p d_q g_ij; pure second derivatives use the 3/4-point stencils."""
    chart = g.chart
    m = chart.m
    full = g.full()
    par = radial_parity((m, m))
    dg = metric_jet(g)
    out = np.empty(chart.shape + (m, m, m, m))
    for p in range(m):
        out[..., p, p, :, :] = diff(chart, full, p, 2, par)
        for q in range(p + 1, m):
            mixed = diff(chart, dg[..., q, :, :], p, 1, par)
            out[..., p, q, :, :] = mixed
            out[..., q, p, :, :] = mixed
    return out


def deturck_rhs(g, gt, route="A"):
    """-2 Ric(g) + L_{W(g,gt)} g.

    ``route="A"`` assembles it from :func:`ricci`, :func:`deturck_field` and
    :func:`lie_derivative_metric`; ``route="B"`` uses the expansion
    ``g^pq d_p d_q g + R(g, dg) - L_V g`` with ``V^r = g^pq Gamma(gt)^r_pq``.
    ``route="both"`` returns the pair.
    """
    if route not in ("A", "B", "both"):
        raise ValueError(f"unknown route {route!r}")
    chart = g.chart
    out = []
    if route in ("A", "both"):
        w, _ = deturck_field(g, gt)
        a = -2.0 * ricci(g).values + lie_derivative_metric(g, w).values
        out.append(SymTensorField(chart, "sym2", a))
    if route in ("B", "both"):
        gi = g.inv
        lap = np.einsum("...pq,...pqij->...ij", gi, metric_hessian(g))
        quad = quadratic_term(gi, metric_jet(g))
        v = np.einsum("...pq,...rpq->...r", gi, christoffel(gt).gamma)
        lv = lie_derivative_metric(g, SymTensorField(chart, "vector", v)).values
        b = pack_sym(_sym(lap + quad)) - lv
        out.append(SymTensorField(chart, "sym2", b))
    return out[0] if len(out) == 1 else tuple(out)

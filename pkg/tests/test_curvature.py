import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ricci_bvp import curvature as cv
from ricci_bvp.data import (flat_ball, random_smooth_metric, random_smooth_sym, round_sphere_ball,
                            warped_slab)
from ricci_bvp.grid import Chart, MetricField, SymTensorField, flat_metric

from conftest import smooth_metric


def test_flat_slab_is_flat(backend):
    g = flat_metric(Chart.slab(2, 9, 6))
    assert np.abs(cv.ricci(g).values).max() == 0.0
    assert cv.riemann_norm(g).max() == 0.0
    for side in g.chart.sides:
        H1, H2 = cv.mean_curvature(g, side, return_both=True)
        assert np.abs(H1).max() <= 1e-12 and np.abs(H2).max() <= 1e-12


def test_hyperbolic_warped_slab_second_order(backend):
    """dx0^2 + exp(2 a x0) |dx|^2 has constant curvature -a^2."""
    a, errs = 0.7, []
    for N in (17, 33):
        g = warped_slab(Chart.slab(2, N, 4), "exp", a)
        ric = cv.ricci(g).values
        errs.append(np.abs(ric + 2 * a * a * g.values)[2:-2].max())
        rm = cv.riemann_norm(g)[2:-2]
        assert np.allclose(rm, np.sqrt(12) * a * a, atol=0.01)
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_warped_mean_curvature_sign():
    a = 0.7
    g = warped_slab(Chart.slab(2, 65, 4), "exp", a)
    assert np.allclose(cv.mean_curvature(g, "upper"), 2 * a, atol=1e-3)
    assert np.allclose(cv.mean_curvature(g, "lower"), -2 * a, atol=1e-3)


def test_flat_ball_boundary_geometry():
    c = Chart.ball(2, 50)
    g = flat_ball(c)
    k = c.patch_center
    assert abs(cv.mean_curvature(g, "outer")[k, k] - 2.0) < 1e-12
    assert abs(cv.second_form_norm(g, "outer")[k, k] - np.sqrt(2)) < 1e-12


def test_round_sphere_einstein():
    """Ric = 2 g away from the polar coordinate singularity at r = 0."""
    c = Chart.ball(2, 100)
    g = round_sphere_ball(c)
    k = c.patch_center
    ric = cv.ricci_full(g)[50:100, k, k]
    assert np.abs(ric - 2 * g.full()[50:100, k, k]).max() < 1e-5


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_trace_of_second_form_is_mean_curvature(seed):
    g = random_smooth_metric(Chart.slab(2, 9, 6), np.random.default_rng(seed), 0.2)
    for side in g.chart.sides:
        bg = cv.BoundaryGeometry(g, side)
        tr = np.einsum("...ab,...ab->...", np.linalg.inv(bg.gT), bg.A)
        assert np.allclose(tr, bg.H, atol=1e-11)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 3.0))
def test_mean_curvature_scaling(seed, lam):
    """H(lam g) = H(g) / sqrt(lam)."""
    g = random_smooth_metric(Chart.slab(2, 9, 6), np.random.default_rng(seed), 0.2)
    gl = MetricField(g.chart, lam * g.values)
    for side in g.chart.sides:
        assert np.allclose(cv.mean_curvature(gl, side), cv.mean_curvature(g, side) / np.sqrt(lam),
                           rtol=1e-10, atol=1e-12)


def test_mean_curvature_routes_converge():
    orders = []
    for seed in range(5):
        e = []
        for N in (9, 17, 33):
            g = random_smooth_metric(Chart.slab(2, N, N - 1), np.random.default_rng(seed), 0.2)
            e.append(max(np.abs(np.subtract(*cv.mean_curvature(g, s, True))).max()
                          for s in g.chart.sides))
        orders.append(np.polyfit(np.log([8, 16, 32]), -np.log(e), 1)[0])
    assert min(orders) >= 0.8


@pytest.mark.parametrize("seed", range(4))
def test_linearization_matches_finite_difference(seed):
    c = Chart.slab(2, 9, 8)
    rng = np.random.default_rng(seed)
    g = random_smooth_metric(c, rng, 0.2)
    hv = random_smooth_sym(c, rng, 1.0)
    h = SymTensorField.from_full(c, "sym2", hv / np.abs(hv).max())
    eps = 1e-4
    gp, gm = MetricField(c, g.values + eps * h.values), MetricField(c, g.values - eps * h.values)
    for side in c.sides:
        hp = cv.mean_curvature_linearized(g, h, side)
        fd = (cv.mean_curvature(gp, side) - cv.mean_curvature(gm, side)) / (2 * eps)
        assert np.abs(hp - fd).max() <= 1e-6 * np.abs(fd).max()


def test_deturck_field_vanishes_for_equal_background(backend):
    g = smooth_metric(Chart.slab(2, 9, 8), 1)
    w, _ = cv.deturck_field(g, g)
    assert np.abs(w.values).max() < 1e-13


def test_bianchi_vanishes_on_einstein_interior():
    """Bianchi operator of Ric on a constant-curvature metric is small."""
    for N in (17, 33):
        g = warped_slab(Chart.slab(2, N, 4), "exp", 0.5)
        b = cv.bianchi(g, cv.ricci(g))
        assert np.abs(b.values[3:-3]).max() < 1e-10


def test_rhs_routes_agree_on_flat_and_converge():
    g = flat_metric(Chart.slab(2, 9, 8))
    A, B = cv.deturck_rhs(g, g, "both")
    assert np.abs(A.values).max() == 0.0 and np.abs(B.values).max() == 0.0
    e = []
    for N in (9, 17, 33):
        c = Chart.slab(2, N, N - 1)
        A, B = cv.deturck_rhs(smooth_metric(c, 1), smooth_metric(c, 2), "both")
        x0 = c.coords(0)
        sel = (x0 >= 0.25 - 1e-12) & (x0 <= 0.75 + 1e-12)
        e.append(np.abs(A.values - B.values)[sel].max())
    assert np.log2(e[1] / e[2]) > 1.5
    with pytest.raises(ValueError):
        cv.deturck_rhs(g, g, "C")

import warnings

import numpy as np
import pytest

from ricci_bvp.data import warped_slab
from ricci_bvp.flow import FlowProblem, TabulatedBackground, run
from ricci_bvp.gauge import (DegenerateJacobian, DiffeoField, DomainExit, FieldSampler,
                             TrajectoryGap, integrate_diffeo, pullback_metric,
                             pullback_trajectory, ricci_flow_residual)
from ricci_bvp.grid import Chart, MetricField, flat_metric

from test_flow import induced_data


def test_taylor_sampler_exact_on_quadratics():
    c = Chart.slab(1, 9, 8)
    x = c.node_coords()
    f = 1 + 2 * x[..., 0] - 3 * x[..., 0] ** 2
    pts = x + np.array([0.03, 0.0])
    pts[..., 0] = np.clip(pts[..., 0], 0, 1)
    got = FieldSampler(c, f)(pts)
    assert np.allclose(got, 1 + 2 * pts[..., 0] - 3 * pts[..., 0] ** 2, atol=1e-10)
    with pytest.raises(ValueError):
        FieldSampler(c, f, method="cubic")


def test_identity_pullback_is_identity():
    c = Chart.slab(2, 7, 4)
    g = warped_slab(c, "cosh", 0.5)
    out = pullback_metric(c.node_coords(), g)
    assert np.allclose(out.values, g.values, atol=1e-14)


def test_tangential_translation_pulls_back_flat_to_flat():
    c = Chart.slab(2, 7, 8)
    pts = c.node_coords() + np.array([0.0, 0.05, -0.02])
    out = pullback_metric(pts, flat_metric(c))
    assert np.allclose(out.values, flat_metric(c).values, atol=1e-13)


def test_folding_map_is_rejected():
    c = Chart.slab(1, 7, 4)
    pts = c.node_coords().copy()
    pts[..., 0] = 1 - pts[..., 0]
    with pytest.raises(DegenerateJacobian):
        pullback_metric(pts, flat_metric(c))


def _short_trajectory(T=0.004, N=9):
    c = Chart.slab(2, N, 3)
    g0 = warped_slab(c, "cosh", 1.0)
    k = np.zeros_like(g0.values)
    k[..., 0] = np.sin(np.pi * c.node_coords()[..., 0]) ** 4
    bg = TabulatedBackground([0, T], [g0, MetricField(c, g0.values + T * k)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run(FlowProblem(g0, induced_data(g0, True, T), background=bg, T=T,
                               snapshot_every=1))


def test_diffeo_fixes_boundary_and_stays_invertible():
    tr = _short_trajectory()
    d = integrate_diffeo(tr)
    assert len(d.times) == len(tr.times)
    assert d.boundary_drift() <= 1e-9
    assert d.jacobian_det_min(len(d.times) - 1) > 0.5
    tp, pulled = pullback_trajectory(tr, d)
    _, rp = ricci_flow_residual(tp, pulled)
    _, rr = ricci_flow_residual(tr.times, tr.snapshots)
    assert np.all(rp < rr)


def test_trajectory_gap():
    tr = _short_trajectory()
    with pytest.raises(TrajectoryGap):
        integrate_diffeo(tr, t_end=1.0)
    with pytest.raises(ValueError):
        ricci_flow_residual(tr.times[:2], tr.snapshots[:2])


def test_domain_exit_reported():
    c = Chart.slab(1, 5, 4)

    class Fake:
        chart = c
        times = [0.0, 1.0]
        snapshots = [flat_metric(c)] * 2

    w = np.zeros(c.shape + (2,))
    w[..., 0] = -5.0                       # psi moves by +5 in x0
    with pytest.raises(DomainExit):
        integrate_diffeo(Fake(), w_series=[w, w])


def test_diffeo_field_at_time():
    c = Chart.slab(1, 5, 4)
    d = DiffeoField(c, [0.0], [c.node_coords()])
    assert np.array_equal(d.at_time(0.0), c.node_coords())
    with pytest.raises(KeyError):
        d.at_time(0.5)

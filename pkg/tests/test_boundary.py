import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ricci_bvp import boundary as bd
from ricci_bvp import curvature as cv
from ricci_bvp.data import warped_slab
from ricci_bvp.grid import Chart, flat_metric, pack_sym


@pytest.mark.parametrize("n", range(1, 7))
def test_residual_dimension_identity(n):
    gauge, mean, conf = bd.residual_layout(n)
    assert gauge + mean + conf == (n + 1) * (n + 2) // 2


def test_residual_layout_matches_stacked_residual():
    c = Chart.slab(2, 7, 4)
    g = flat_metric(c)
    dat = bd.BoundaryDatum(bd.ConstantGamma(np.eye(2)), bd.ConstantEta(0.0))
    r = bd.stacked_residual(g, g, dat, 0.0, "lower")
    assert r.shape[-1] == sum(bd.residual_layout(2))
    assert np.abs(r).max() == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.integers(0, 1000))
def test_conformal_residual_is_scale_invariant(lam, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3))
    gamma = a @ a.T + 3 * np.eye(3)
    assert np.abs(bd.conformal_full(lam * gamma, gamma)).max() < 1e-12
    assert np.isclose(bd.conformal_factor(lam * gamma, gamma), lam)


def test_rules_and_horizons():
    sg = bd.ScaledGamma.linear(np.eye(2), -4.0, 0.2)
    assert np.allclose(sg.at(0.1), 0.6 * np.eye(2))
    with pytest.raises(bd.TabulationError):
        sg.at(0.3)
    with pytest.raises(ValueError):
        bd.ScaledGamma.linear(np.eye(2), -4.0, 1.0)
    with pytest.raises(ValueError):
        bd.ConstantGamma(np.diag([1.0, -1.0]))
    te = bd.TabulatedEta.linear(0.0, 1.0, 0.5)
    assert te.at(0.25) == pytest.approx(0.25)
    datum = bd.BoundaryDatum(sg, te)
    with pytest.raises(bd.TabulationError):
        datum.check_horizon(0.3)


def test_newton_restores_flat_boundary():
    c = Chart.slab(2, 9, 6)
    g = flat_metric(c)
    dat = bd.BoundaryDatum(bd.ConstantGamma(np.eye(2)), bd.ConstantEta(0.0))
    full = g.full().copy()
    rng = np.random.default_rng(0)
    noise = rng.normal(size=c.boundary_shape + (3, 3)) * 1e-3
    full[0] += noise + np.swapaxes(noise, -1, -2)
    res = bd.solve_boundary(full, g, dat, 0.0, "lower")
    assert res.residual <= 1e-10
    assert np.abs(res.values - pack_sym(np.eye(3))).max() < 1e-8


@pytest.mark.parametrize("side", ["lower", "upper"])
def test_newton_recovers_warped_boundary(side):
    c = Chart.slab(2, 17, 4)
    g = warped_slab(c, "cosh", 0.8)
    k = 0 if side == "lower" else c.N0 - 1
    dat = bd.BoundaryDatum(bd.ConstantGamma(g.full()[k][..., 1:, 1:]),
                           bd.ConstantEta(cv.mean_curvature(g, side)))
    full = g.full().copy()
    full[k] += 1e-2 * np.eye(3)
    res = bd.solve_boundary(full, g, dat, 0.0, side)
    assert res.residual <= 1e-10
    assert np.abs(res.values - g.values[k]).max() < 1e-8


def test_newton_reports_nonconvergence():
    c = Chart.slab(1, 7, 4)
    g = flat_metric(c)
    dat = bd.BoundaryDatum(bd.ConstantGamma(np.eye(1)), bd.ConstantEta(50.0))
    with pytest.raises((bd.NonConvergence, bd.SingularJacobian)):
        bd.solve_boundary(g, g, dat, 0.0, "lower", maxiter=3)

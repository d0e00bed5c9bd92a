import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ricci_bvp.boundary import ConstantEta
from ricci_bvp.grid import DegenerateMetric
from ricci_bvp.rotsym import (RotProblem, RotState, flat_state, hemisphere_exact,
                              hemisphere_state, radial_nodes, reconstruct_psi, relative_error,
                              rot_boundary_close, rot_cfl_dt, rot_rhs, rot_run)


def test_radial_nodes_are_cell_centred():
    r = radial_nodes(4)
    assert np.allclose(r, [0.125, 0.375, 0.625, 0.875])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_psi_reconstruction_exact_for_constant_integrand(c_phi, c_w):
    N = 16
    psi, face = reconstruct_psi(np.full(N, c_phi), np.full(N, c_w), 1.0 / N)
    assert np.allclose(psi, c_phi * c_w * radial_nodes(N), rtol=1e-13)
    assert face == pytest.approx(c_phi * c_w)


def test_state_validation():
    with pytest.raises(ValueError):
        flat_state(10, 1)
    with pytest.raises(DegenerateMetric):
        RotState(0.0, -np.ones(5), n=2, dspsi=np.ones(5))


def test_flat_ball_rhs_vanishes(backend):
    s = flat_state(50, 2)
    c = rot_boundary_close(s, ConstantEta(2.0), 0.0)
    dphi, dpsi = rot_rhs(s, (c.phi_ghost, c.w_ghost))
    assert np.abs(dphi).max() < 1e-12 and np.abs(dpsi).max() < 1e-12
    assert abs(c.residual) < 1e-14


def test_hemisphere_rhs_matches_scaling(backend):
    """d/dt at t = 0 of sqrt(1 - 4 t) (phi, psi) is -2 (phi, psi)."""
    errs = []
    for N in (50, 100):
        s = hemisphere_state(N, 2)
        c = rot_boundary_close(s, ConstantEta(0.0), 0.0)
        dphi, dpsi = rot_rhs(s, (c.phi_ghost, c.w_ghost))
        errs.append(max(np.abs(dphi / s.phi + 2).max(), np.abs(dpsi / s.psi + 2).max()))
    assert errs[1] < errs[0] / 2.5


def test_dt_bound():
    s = hemisphere_state(40, 3)
    assert rot_cfl_dt(s, 0.9) <= 0.9 * s.phi.min() ** 2 * s.h**2 / 2


def test_flat_ball_static(backend):
    tr = rot_run(RotProblem(flat_state(40, 2), ConstantEta(2.0), T=0.05))
    assert tr.termination == "horizon"
    assert relative_error(tr.final_state, flat_state(40, 2)) < 1e-12
    assert tr.flag_time is None


def test_hemisphere_short_run_tracks_exact(backend):
    tr = rot_run(RotProblem(hemisphere_state(50, 2), ConstantEta(0.0), T=0.02,
                            snapshot_times=(0.01,)))
    s = tr.final_state
    assert s.t == 0.02 and 0.01 in tr.times
    assert relative_error(s, hemisphere_exact(50, 2, 0.02)) < 1e-4
    assert tr.max_boundary_residual < 1e-12


def test_snapshot_times_and_boundary_series():
    tr = rot_run(RotProblem(hemisphere_state(20, 2), ConstantEta(0.0), T=0.01,
                            snapshot_times=(0.0025, 0.005)))
    t, vals = tr.boundary_series()
    assert list(t) == [0.0, 0.0025, 0.005, 0.01]
    assert vals.shape == (4, 2)

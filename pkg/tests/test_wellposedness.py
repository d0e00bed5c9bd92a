import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ricci_bvp.boundary import BoundaryDatum, ConstantEta, ConstantGamma, ScaledGamma, TabulatedEta
from ricci_bvp import curvature as cv
from ricci_bvp.data import flat_ball
from ricci_bvp.flow import FrozenBackground
from ricci_bvp.grid import Chart, flat_metric
from ricci_bvp.wellposedness import (BLOWUP_FLOOR, blowup_flag, blowup_flag_incremental,
                                     blowup_index, check_sample, compat_check,
                                     complementing_check, corner_probe, elimination_chain,
                                     extension_monitor, geometric_times, symbol_matrix, tau_hat)

BASELINES = {2: "0x1.f55dcc5637060p-2", 3: "0x1.0804808ed5512p+0", 4: "0x1.0ae9f16750742p+0"}

admissible = st.tuples(st.floats(-0.9, 50.0), st.floats(-50.0, 50.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), admissible, st.integers(0, 1000))
def test_determinant_factorizes(n, pq, seed):
    """|det| = |tau_hat|^n |p n + 2 (n - 1) |zeta|^2| / 2."""
    zeta = np.random.default_rng(seed).normal(size=n)
    zz = float(zeta @ zeta)
    p = complex(pq[0] * zz, pq[1] * zz)
    s = symbol_matrix(n, p, zeta)
    want = 0.5 * abs(s.tau_hat) ** n * abs(p * n + 2 * (n - 1) * zz)
    scale = abs(s.tau_hat) ** n * (abs(p) + zz)
    assert abs(s.det()) == pytest.approx(want, rel=1e-9, abs=1e-12 * scale)
    chain = elimination_chain(s)
    assert chain["isolation_residual"] <= 1e-12 * (1 + abs(s.tau_hat))


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 50.0), st.floats(-50.0, 50.0))
def test_tau_hat_in_upper_half_plane(a, b):
    t = tau_hat(complex(a, b), np.array([1.0, 0.0]))
    assert t.imag >= 0
    assert t * t == pytest.approx(-(complex(a, b) + 1.0))


def test_upper_convention_flips_tau():
    lo = symbol_matrix(2, 1.0 + 1j, [0.3, 0.4])
    up = symbol_matrix(2, 1.0 + 1j, [0.3, 0.4], "upper")
    assert up.matrix[2, 3] == -lo.matrix[2, 3]
    with pytest.raises(ValueError):
        symbol_matrix(2, 1.0, [1.0])


def test_single_samples():
    assert check_sample(2, 0.0, [1.0, 0.0])["status"] == "ok"
    assert check_sample(1, 0.0, [1.0])["status"] == "fail"
    assert check_sample(2, -1.0, [1.0, 0.0])["status"] == "excluded"


@pytest.mark.parametrize("n", [2, 3, 4])
def test_complementing_baselines(n, backend):
    rep = complementing_check(n, 100, 0.9, 42)
    assert rep.passed and rep.min_normalized_det > 0
    assert float(rep.min_normalized_det).hex() == BASELINES[n]


def test_complementing_control_fails():
    rep = complementing_check(1, 100, 0.9, 42)
    assert len(rep.failures) >= 1
    assert all(rep.samples[k]["kind"] == "p=0" for k in rep.failures)
    with pytest.raises(ValueError):
        complementing_check(2, 10, delta1=1.5)


def _slab_data(g, eta):
    return {s: BoundaryDatum(ConstantGamma(cv.BoundaryGeometry(g, s).gT), eta)
            for s in g.chart.sides}


def test_compat_flat_slab_passes():
    g = flat_metric(Chart.slab(2, 7, 4))
    rep = compat_check(g, _slab_data(g, ConstantEta(0.0)), FrozenBackground(g))
    assert rep.order0_pass and rep.order1_pass


def test_compat_detects_order0_and_order1():
    g = flat_metric(Chart.slab(2, 7, 4))
    assert not compat_check(g, _slab_data(g, ConstantEta(0.5))).order0_pass
    rep = compat_check(g, _slab_data(g, TabulatedEta.linear(0.0, 1.0, 1.0)))
    assert rep.order0_pass and not rep.order1_mean_pass
    assert max(abs(v).max() for v in rep.order1_mean.values()) == pytest.approx(1.0, abs=1e-6)


def test_compat_rejects_misaligned_background():
    c = Chart.slab(1, 7, 4)
    g = flat_metric(c)
    with pytest.raises(ValueError):
        compat_check(g, _slab_data(g, ConstantEta(0.0)), FrozenBackground(flat_metric(c, 2.0)))


class _Series:
    def __init__(self, times, values):
        self.times, self.values = times, values

    def boundary_series(self, side=None):
        return np.array(self.times), np.array(self.values)


def test_corner_probe_classifies():
    t = np.array((0.0,) + geometric_times(0.1, 5))
    smooth = corner_probe(_Series(t, np.column_stack([1 + t + t**2])))
    assert smooth.bounded and not smooth.growth
    rough = corner_probe(_Series(t, np.column_stack([1 + np.sqrt(t)])))
    assert rough.growth and rough.d1_exponent == pytest.approx(0.5, abs=1e-6)
    flat = corner_probe(_Series(t, np.ones((t.size, 1))))
    assert flat.at_roundoff and flat.bounded
    with pytest.raises(ValueError):
        corner_probe(_Series(t[1:], np.ones((t.size - 1, 1))))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1e3), min_size=3, max_size=30))
def test_blowup_flag_streaming_matches_batch(values):
    mon = blowup_flag_incremental()
    streamed = any([mon(v) for v in values])
    assert streamed == blowup_flag(values)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 10.0), st.integers(3, 20))
def test_constant_series_never_flags(m0, k):
    assert not blowup_flag(np.full(k, m0))


def test_blowup_floor_and_growth():
    assert blowup_index([0.0, 1e-7, 2e-7, 3e-7]) is None
    assert blowup_index([1e-13, 1e-7, 1e-6, 2e-6]) == 2
    assert BLOWUP_FLOOR == 1e-6
    assert blowup_index([1.0, 50.0, 90.0, 200.0]) == 3


def test_extension_monitor_reads_diagnostics():
    class T:
        def series(self, key):
            return {"t": np.arange(5.0), "sup_rm": np.array([1, 2, 50, 150, 300.0]),
                    "sup_A": np.zeros(5)}[key]
    rep = extension_monitor(T())
    assert rep.flag and rep.t_flag == 3.0

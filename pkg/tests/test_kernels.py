"""The numba and numpy flavours of every kernel agree."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ricci_bvp import kernels
from ricci_bvp._backend import HAVE_NUMBA

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not importable")


def _spd(rng, shape, m):
    a = rng.normal(size=shape + (m, m))
    return np.einsum("...ij,...kj->...ik", a, a) + m * np.eye(m)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 4), st.integers(0, 1000))
def test_christoffel_and_ricci_agree(m, seed):
    rng = np.random.default_rng(seed)
    gi = np.linalg.inv(_spd(rng, (5,), m))
    dg = rng.normal(size=(5, m, m, m))
    dg = dg + np.swapaxes(dg, -1, -2)
    a, b = kernels.christoffel_numpy(gi, dg), kernels.christoffel_numba(gi, dg)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    dgam = rng.normal(size=(5, m, m, m, m))
    r1, r2 = kernels.ricci_from_gamma_numpy(a, dgam), kernels.ricci_from_gamma_numba(a, dgam)
    assert np.allclose(r1, r2, rtol=1e-12, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 4), st.integers(0, 1000))
def test_rm_norm_agrees(m, seed):
    rng = np.random.default_rng(seed)
    gi = np.linalg.inv(_spd(rng, (4,), m))
    rm = rng.normal(size=(4, m, m, m, m))
    assert np.allclose(kernels.rm_norm_sq_numpy(gi, rm), kernels.rm_norm_sq_numba(gi, rm),
                       rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_lu_det_bit_identical(k, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    d1, d2 = kernels.lu_det_numpy(a), kernels.lu_det_numba(a)
    assert d1 == d2
    assert np.isclose(d1, np.linalg.det(a), rtol=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_rot_rhs_agrees(n):
    rng = np.random.default_rng(n)
    N = 30
    phi = 1 + 0.1 * rng.random(N + 2)
    w = 1 + 0.1 * rng.random(N + 2)
    psi = np.cumsum(np.full(N, 1.0 / N))
    a = kernels.rot_rhs_numpy(phi, w, psi, 1.0 / N, float(n))
    b = kernels.rot_rhs_numba(phi, w, psi, 1.0 / N, float(n))
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_interp_agrees():
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(7 * 5, 2))
    dims = np.array([7, 5])
    x0 = np.array([0.0, 0.0])
    h = np.array([1 / 6, 1 / 5])
    per = np.array([False, True])
    pts = np.column_stack([rng.uniform(0, 1, 40), rng.uniform(-1, 2, 40)])
    a = kernels.interp_multilinear_numpy(vals, dims, x0, h, per, pts)
    b = kernels.interp_multilinear_numba(vals, dims, x0, h, per, pts)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_select_rebinds():
    kernels.select(False)
    assert kernels.christoffel is kernels.christoffel_numpy
    kernels.select(True)
    assert kernels.christoffel is kernels.christoffel_numba


def test_env_flag_selects_numpy():
    import os
    import subprocess
    import sys
    env = dict(os.environ, RICCI_BVP_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "import ricci_bvp, ricci_bvp.kernels as k; "
                          "print(ricci_bvp.backend_name(), k.christoffel is k.christoffel_numpy)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]


def test_benchmark_smoke(capsys):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    assert mod.main(["--repeat", "1", "--size", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 7 and all(line.endswith("True") for line in lines[1:])

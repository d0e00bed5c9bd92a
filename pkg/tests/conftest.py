import numpy as np
import pytest

from ricci_bvp import kernels
from ricci_bvp._backend import HAVE_NUMBA
from ricci_bvp.grid import Chart, MetricField

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run a test once per kernel backend, restoring the default afterwards."""
    default = kernels.christoffel is kernels.christoffel_numba
    kernels.select(request.param == "numba")
    yield request.param
    kernels.select(default)


def smooth_metric(chart, seed, amp=0.1):
    """delta plus a few low modes; periodic in the tangential directions."""
    x = chart.node_coords()
    m = chart.m
    rng = np.random.default_rng(seed)
    out = np.broadcast_to(np.eye(m), chart.shape + (m, m)).copy()
    L = chart.L
    for i in range(m):
        for j in range(i, m):
            c = rng.normal(size=4) * amp
            v = c[0] * np.sin(np.pi * x[..., 0] + c[1])
            if m > 1:
                v = v + c[2] * np.cos(2 * np.pi * x[..., 1] / L + c[3]) * np.sin(
                    2 * np.pi * x[..., -1] / L)
            out[..., i, j] += v
            if i != j:
                out[..., j, i] += v
    return MetricField.from_full(chart, out)


@pytest.fixture
def slab9():
    return Chart.slab(2, 9, 8)


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

"""Compare the numba and numpy flavours of the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 33]

Each kernel is called once to trigger compilation, then timed as the best of
``--repeat`` runs.  Outputs of the two flavours are checked for agreement.
"""
import argparse
import time

import numpy as np

from ricci_bvp import kernels
from ricci_bvp._backend import HAVE_NUMBA


def _spd(rng, shape, m):
    a = rng.normal(size=shape + (m, m))
    return np.einsum("...ij,...kj->...ik", a, a) + m * np.eye(m)


def cases(size, rng):
    m = 3
    nodes = size * size * size
    gi = np.linalg.inv(_spd(rng, (nodes,), m))
    dg = rng.normal(size=(nodes, m, m, m))
    dg = dg + np.swapaxes(dg, -1, -2)
    gam = rng.normal(size=(nodes, m, m, m))
    dgam = rng.normal(size=(nodes, m, m, m, m))
    rm = rng.normal(size=(nodes, m, m, m, m))
    vals = rng.normal(size=(nodes, 6))
    dims = np.array([size, size, size])
    pts = rng.uniform(0, 1, size=(nodes, 3))
    x0, h = np.zeros(3), np.full(3, 1.0 / (size - 1))
    per = np.array([False, True, True])
    N = 50 * size
    phi = 1 + 0.1 * rng.random(N + 2)
    w = 1 + 0.1 * rng.random(N + 2)
    psi = np.cumsum(np.full(N, 1.0 / N))
    mats = [rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(200)]
    return {
        "christoffel": lambda f: f(gi, dg),
        "ricci_from_gamma": lambda f: f(gam, dgam),
        "rm_norm_sq": lambda f: f(gi, rm),
        "interp_multilinear": lambda f: f(vals, dims, x0, h, per, pts),
        "rot_rhs": lambda f: f(phi, w, psi, 1.0 / N, 2.0),
        "lu_det (200 x 4x4)": lambda f: [f(a) for a in mats],
    }


def best_of(call, repeat):
    out = call()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        call()
        best = min(best, time.perf_counter() - t)
    return best, out


def _agree(a, b):
    if isinstance(a, (tuple, list)):
        return all(_agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=33, help="nodes per axis of the 3-D grid")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not available (or disabled); nothing to compare")
        return 0
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}  agree")
    for name, case in cases(args.size, rng).items():
        base = name.split()[0]
        f_np = getattr(kernels, base + "_numpy")
        f_nb = getattr(kernels, base + "_numba")
        t_np, o_np = best_of(lambda: case(f_np), args.repeat)
        t_nb, o_nb = best_of(lambda: case(f_nb), args.repeat)
        print(f"{name:24s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.2f}  "
              f"{_agree(o_np, o_nb)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

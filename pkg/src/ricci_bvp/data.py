"""Initial-data catalogue: flat, warped slabs, rotationally symmetric balls and
random smooth metrics.

Warp profiles are referenced by name so configuration files never carry
expressions.  Each profile ``f(x, a)`` comes with its first two derivatives.
"""
import numpy as np

from .grid import BALL, SLAB, MetricField, flat_metric

# name -> (f, f', f'') as functions of (x, a)
WARP_PROFILES = {
    "const": (lambda x, a: np.ones_like(x),
              lambda x, a: np.zeros_like(x),
              lambda x, a: np.zeros_like(x)),
    "exp": (lambda x, a: np.exp(a * x),
            lambda x, a: a * np.exp(a * x),
            lambda x, a: a * a * np.exp(a * x)),
    "cosh": (lambda x, a: np.cosh(a * (x - 0.5)),
             lambda x, a: a * np.sinh(a * (x - 0.5)),
             lambda x, a: a * a * np.cosh(a * (x - 0.5))),
    "bump": (lambda x, a: 1.0 + a * np.sin(np.pi * x) ** 2,
             lambda x, a: a * np.pi * np.sin(2 * np.pi * x),
             lambda x, a: 2 * a * np.pi**2 * np.cos(2 * np.pi * x)),
    "linear": (lambda x, a: 1.0 + a * x,
               lambda x, a: a * np.ones_like(x),
               lambda x, a: np.zeros_like(x)),
}


def warp_profile(name):
    try:
        return WARP_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown warp profile {name!r}; "
                         f"choose from {sorted(WARP_PROFILES)}") from None


def warped_slab_full(x0, n, psi):
    """Full metric dx0^2 + psi(x0)^2 delta on arrays of normal coordinates."""
    m = n + 1
    out = np.zeros(np.shape(x0) + (m, m))
    out[..., 0, 0] = 1.0
    for a in range(1, m):
        out[..., a, a] = psi**2
    return out


def warped_slab(chart, profile="cosh", a=0.5):
    """The metric dx0^2 + psi0(x0)^2 (sum of dx_alpha^2) on a slab chart."""
    if chart.kind != SLAB:
        raise ValueError("warped slab data needs a slab chart")
    f, _, _ = warp_profile(profile)
    x0 = chart.node_coords()[..., 0]
    return MetricField.from_full(chart, warped_slab_full(x0, chart.n, f(x0, a)))


def warped_ball_full(r, theta, phi, psi):
    """phi(r)^2 dr^2 + psi(r)^2 ds^2_n in polyspherical coordinates.

    ``theta[..., k]`` are the angles; the round metric is
    ``dtheta_1^2 + sin^2 theta_1 dtheta_2^2 + ...``.
    """
    n = theta.shape[-1]
    out = np.zeros(np.shape(r) + (n + 1, n + 1))
    out[..., 0, 0] = phi**2
    w = np.ones_like(r)
    for a in range(n):
        out[..., a + 1, a + 1] = psi**2 * w
        w = w * np.sin(theta[..., a]) ** 2
    return out


def warped_ball(chart, phi_fn, psi_fn):
    """Sample a rotationally symmetric metric on a ball chart (ghosts included)."""
    if chart.kind != BALL:
        raise ValueError("warped ball data needs a ball chart")
    x = chart.node_coords()
    r = x[..., 0]
    return MetricField.from_full(chart, warped_ball_full(r, x[..., 1:], phi_fn(r), psi_fn(r)))


def flat_ball(chart):
    return warped_ball(chart, np.ones_like, lambda r: r)


def hemisphere_ball(chart):
    """Upper hemisphere of the unit sphere as phi = pi/2, psi = sin(pi r / 2)."""
    return warped_ball(chart, lambda r: np.full_like(r, np.pi / 2),
                       lambda r: np.sin(np.pi * r / 2))


def round_sphere_ball(chart):
    """phi = 1, psi = sin r: a geodesic ball of radius 1 in the unit sphere."""
    return warped_ball(chart, np.ones_like, np.sin)


def random_smooth_sym(chart, rng, amplitude=0.2, modes=2):
    """A smooth symmetric tensor field built from a few low Fourier modes."""
    m = chart.m
    x = chart.node_coords()
    out = np.zeros(chart.shape + (m, m))
    for i in range(m):
        for j in range(i, m):
            acc = np.zeros(chart.shape)
            for _ in range(modes):
                phase = rng.uniform(0, 2 * np.pi)
                arg = rng.uniform(0.5, 2.0) * np.pi * x[..., 0] + phase
                for a in range(1, m):
                    if chart.kind == SLAB:
                        k = rng.integers(0, 3)
                        arg = arg + 2 * np.pi * k * x[..., a] / chart.L
                    else:
                        arg = arg + rng.uniform(-1, 1) * x[..., a]
                acc += rng.normal() * np.sin(arg)
            out[..., i, j] = out[..., j, i] = amplitude * acc / np.sqrt(modes)
    return out


def random_smooth_metric(chart, rng, amplitude=0.2, modes=2):
    """delta plus a random smooth symmetric perturbation (kept SPD)."""
    pert = random_smooth_sym(chart, rng, amplitude, modes)
    base = np.eye(chart.m)
    return MetricField.from_full(chart, base + pert)


__all__ = ["WARP_PROFILES", "warp_profile", "warped_slab", "warped_ball", "flat_ball",
           "hemisphere_ball", "round_sphere_ball", "random_smooth_metric",
           "random_smooth_sym", "flat_metric"]

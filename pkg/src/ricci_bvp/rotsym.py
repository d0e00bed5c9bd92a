"""Rotationally symmetric Ricci flow on the unit (n+1)-ball.

The metric ``phi(r)^2 dr^2 + psi(r)^2 ds_n^2`` evolves by

    phi_t = n (psi_ss / psi) phi,
    psi_t = psi_ss - (n - 1) (1 - psi_s^2) / psi,     d_s = phi^{-1} d_r.

In the radial coordinate ``phi`` obeys a transport equation whose
characteristics leave the origin, and a direct discretisation of the pair
(phi, psi) is unstable at the first cell.  The solver therefore advances
``phi`` together with ``w = psi_s``:

    phi_t = n w_r / psi,
    w_t   = w_ss + (n - 2) w w_s / psi + (n - 1) (1 - w^2) w / psi^2,

and recovers ``psi(r) = int_0^r phi w dr`` by the midpoint rule.  Both
systems describe the same flow; the second is a damped parabolic equation for
``w`` and an ODE for ``phi``.

Grid: cell centres ``r_j = (j + 1/2) h``, ``h = 1/N0``.  Parity ghosts (phi and
w even) sit at ``r = -h/2``.  At ``r = 1 + h/2`` the ghost of ``w`` enforces
the face mean curvature ``n w / psi = eta`` and the ghost of ``phi`` is
extrapolated quadratically (no condition constrains ``phi`` at the boundary).
"""
from dataclasses import dataclass, field
import time

import numpy as np

from . import kernels
from .boundary import ConstantEta
from .grid import DegenerateMetric


def radial_nodes(N0):
    return (np.arange(N0) + 0.5) / N0


def reconstruct_psi(phi, w, h):
    """Node values and the face value at r = 1 of psi = int_0^r phi w dr."""
    faces = np.cumsum(h * phi * w)
    psi = 0.5 * faces
    psi[1:] += 0.5 * faces[:-1]
    return psi, float(faces[-1])


def _node_derivative(psi, phi, h):
    """Second-order d_s psi at the nodes from node values of psi."""
    ext = np.concatenate([[-psi[0]], psi, [3 * psi[-1] - 3 * psi[-2] + psi[-3]]])
    return (ext[2:] - ext[:-2]) / (2 * h * phi)


class RotState:
    """Radial profiles at time ``t``.

    The independent variables are ``phi`` and ``dspsi = psi_s``; ``psi`` is
    always the integral of ``phi * dspsi`` and is recomputed on construction.
    When ``dspsi`` is omitted it is estimated from the supplied ``psi``.
    """

    def __init__(self, t, phi, psi=None, n=2, dspsi=None):
        self.t = float(t)
        self.n = int(n)
        self.phi = np.array(phi, dtype=float)
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.phi.ndim != 1 or self.phi.size < 4:
            raise ValueError("phi must be a 1-D array with at least 4 nodes")
        if dspsi is None:
            if psi is None:
                raise ValueError("give psi or dspsi")
            psi = np.asarray(psi, dtype=float)
            if psi.shape != self.phi.shape:
                raise ValueError("phi and psi must have equal shape")
            dspsi = _node_derivative(psi, self.phi, self.h)
        self.dspsi = np.array(dspsi, dtype=float)
        if self.dspsi.shape != self.phi.shape:
            raise ValueError("phi and dspsi must have equal shape")
        self.psi, self.psi_face = reconstruct_psi(self.phi, self.dspsi, self.h)
        _check_state(self.phi, self.dspsi, self.psi)

    @property
    def N0(self):
        return self.phi.size

    @property
    def h(self):
        return 1.0 / self.N0

    @property
    def r(self):
        return radial_nodes(self.N0)

    def copy(self):
        return RotState(self.t, self.phi.copy(), n=self.n, dspsi=self.dspsi.copy())

    def __repr__(self):
        return f"RotState(t={self.t:.6g}, N0={self.N0}, n={self.n})"


def rot_state(N0, n, phi_fn, dpsi_fn, t=0.0):
    """State from closed forms of phi(r) and d_r psi(r)."""
    r = radial_nodes(N0)
    phi = phi_fn(r)
    return RotState(t, phi, n=n, dspsi=dpsi_fn(r) / phi)


def flat_state(N0, n):
    return rot_state(N0, n, np.ones_like, np.ones_like)


def hemisphere_state(N0, n):
    """Upper hemisphere: phi = pi/2, psi = sin(pi r / 2); the face is the equator."""
    return rot_state(N0, n, lambda r: np.full_like(r, np.pi / 2),
                     lambda r: np.pi / 2 * np.cos(np.pi * r / 2))


def hemisphere_exact(N0, n, t):
    """Closed-form profiles sqrt(lam) (phi0, psi0), lam = 1 - 2 n t, at the nodes."""
    lam = 1.0 - 2.0 * n * t
    r = radial_nodes(N0)
    return (np.sqrt(lam) * np.full_like(r, np.pi / 2), np.sqrt(lam) * np.sin(np.pi * r / 2))


def _check_state(phi, w, psi):
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(w))):
        raise DegenerateMetric("non-finite radial profile")
    if np.any(phi <= 0):
        raise DegenerateMetric("phi <= 0", int(np.argmax(phi <= 0)))
    if np.any(psi <= 0):
        raise DegenerateMetric("psi <= 0", int(np.argmax(psi <= 0)))


# ---------------------------------------------------------------------------
# boundary closure
# ---------------------------------------------------------------------------

@dataclass
class Closure:
    phi_ghost: float
    w_ghost: float
    phi_face: float
    psi_face: float
    w_face: float
    H: float
    residual: float


def _eta_value(eta_rule, t, psi_face):
    gT = np.array([[psi_face * psi_face]])
    val = eta_rule.at(t, None, gT, np.linalg.inv(gT))
    return float(np.asarray(val, dtype=float).reshape(-1)[0])


def rot_boundary_close(state, eta_rule, t):
    """Ghost values at r = 1 + h/2 enforcing ``n psi_s / psi = eta(t)`` at the face.

    The face value of psi depends only on interior nodes, so the condition
    fixes the face value of ``w`` directly.
    """
    phi, w, n = state.phi, state.dspsi, state.n
    phi_g = 3 * phi[-1] - 3 * phi[-2] + phi[-3]
    qf = state.psi_face
    eta = _eta_value(eta_rule, t, qf)
    wf = eta * qf / n
    w_g = 2 * wf - w[-1]
    H = n * 0.5 * (w[-1] + w_g) / qf
    return Closure(phi_g, w_g, 0.5 * (phi[-1] + phi_g), qf, wf, H, H - eta)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def _extend(state, ghosts):
    phi = np.empty(state.N0 + 2)
    w = np.empty(state.N0 + 2)
    phi[1:-1], w[1:-1] = state.phi, state.dspsi
    phi[0], w[0] = state.phi[0], state.dspsi[0]
    if ghosts is None:
        phi[-1] = 3 * state.phi[-1] - 3 * state.phi[-2] + state.phi[-3]
        w[-1] = 3 * state.dspsi[-1] - 3 * state.dspsi[-2] + state.dspsi[-3]
    else:
        phi[-1], w[-1] = ghosts
    return phi, w


def rot_rhs_full(state, ghosts=None):
    """(dphi, dw, dpsi, |Rm|^2) per node; ``ghosts = (phi, w)`` at r = 1 + h/2."""
    _check_state(state.phi, state.dspsi, state.psi)
    phi, w = _extend(state, ghosts)
    return kernels.rot_rhs(phi, w, state.psi, state.h, float(state.n))


def rot_rhs(state, ghosts=None):
    """(dphi, dpsi) of the reduced flow at the nodes.

    By default the outer ghosts are extrapolated quadratically; pass the
    ghosts of :func:`rot_boundary_close` to impose the mean-curvature datum.
    """
    dphi, _, dpsi, _ = rot_rhs_full(state, ghosts)
    return dphi, dpsi


def radial_profile(state, eta_rule=None):
    """Columns r, phi, psi, d_s psi, local H = n psi_s / psi at the nodes."""
    return np.column_stack([state.r, state.phi, state.psi, state.dspsi,
                            state.n * state.dspsi / state.psi])


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@dataclass
class RotProblem:
    state0: RotState
    eta: object = None
    T: float = 0.1
    safety: float = 0.9
    snapshot_times: tuple = ()
    snapshot_every: int = 0
    rm_stop: float = np.inf
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.eta is None:
            self.eta = ConstantEta(float(self.state0.n))
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if self.T <= 0:
            raise ValueError("horizon must be positive")


@dataclass
class RotTrajectory:
    n: int
    eta: object
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    termination: str = "horizon"
    message: str = ""
    flag_time: float = None
    final_state: RotState = None
    wall_time: float = 0.0
    max_boundary_residual: float = 0.0
    steps: int = 0

    def add_snapshot(self, state):
        if self.times and self.times[-1] == state.t:
            return
        self.times.append(state.t)
        self.states.append(state.copy())

    def series(self, key):
        return np.array([d[key] for d in self.diagnostics])

    def boundary_series(self, side=None):
        """Metric components (phi^2, psi^2) at the last node for each snapshot."""
        vals = [np.array([s.phi[-1] ** 2, s.psi[-1] ** 2]) for s in self.states]
        return np.array(self.times), np.array(vals)


def rot_cfl_dt(state, safety=0.9):
    """safety * min(phi^2) h^2 / (2 + 4.5 (n - 1)).

    The extra factor accounts for the damping term (n-1)(1 - w^2) w / psi^2,
    whose stiffness at the first cell grows like 8 (n - 1) / (phi h)^2.
    """
    return safety * float(np.min(state.phi) ** 2) * state.h**2 / (2.0 + 4.5 * (state.n - 1))


def _diag(state, closure, rm_sq, dt):
    return {"t": state.t, "dt": dt, "sup_rm": float(np.sqrt(np.max(rm_sq))),
            "sup_A": float(np.sqrt(state.n) * abs(closure.w_face / closure.psi_face)),
            "H_face": closure.H, "max_boundary_residual": abs(closure.residual),
            "min_phi": float(state.phi.min()), "min_psi": float(state.psi.min())}


def rot_diagnostics(state, eta_rule, dt=0.0):
    c = rot_boundary_close(state, eta_rule, state.t)
    _, _, _, rm_sq = rot_rhs_full(state, (c.phi_ghost, c.w_ghost))
    return _diag(state, c, rm_sq, dt)


def _stage(state, eta_rule):
    c = rot_boundary_close(state, eta_rule, state.t)
    dphi, dw, _, rm_sq = rot_rhs_full(state, (c.phi_ghost, c.w_ghost))
    return dphi, dw, rm_sq, c


def rot_step(state, eta_rule, dt, first=None):
    """One Heun step with the boundary closure applied at each stage."""
    k1p, k1w, _, _ = first if first is not None else _stage(state, eta_rule)
    pred = RotState(state.t + dt, state.phi + dt * k1p, n=state.n,
                    dspsi=state.dspsi + dt * k1w)
    k2p, k2w, _, _ = _stage(pred, eta_rule)
    new = RotState(state.t + dt, state.phi + 0.5 * dt * (k1p + k2p), n=state.n,
                   dspsi=state.dspsi + 0.5 * dt * (k1w + k2w))
    return new


def rot_run(problem):
    """Integrate the reduced system to the horizon or the curvature threshold."""
    from .wellposedness import blowup_flag_incremental
    start = time.perf_counter()
    state = problem.state0.copy()
    eta = problem.eta
    cur = _stage(state, eta)
    if abs(cur[3].residual) > 1e-8 * (1 + abs(_eta_value(eta, 0.0, state.psi_face))):
        raise ValueError("order-0 compatibility fails: n psi_s/psi(1) != eta(0)")
    traj = RotTrajectory(state.n, eta)
    d = _diag(state, cur[3], cur[2], 0.0)
    traj.diagnostics.append(d)
    traj.add_snapshot(state)
    monitor = blowup_flag_incremental()
    monitor(d["sup_rm"] + d["sup_A"])
    stops = sorted(set(float(s) for s in problem.snapshot_times if 0 < s <= problem.T))
    nstep = 0
    while state.t < problem.T * (1 - 1e-14):
        if nstep >= problem.max_steps:
            traj.termination, traj.message = "max-steps", "step budget exhausted"
            break
        dt = rot_cfl_dt(state, problem.safety)
        target = problem.T
        for s in stops:
            if s > state.t * (1 + 1e-14) + 1e-15:
                target = s
                break
        if state.t + dt >= target * (1 - 1e-12):
            dt = target - state.t
        try:
            new = rot_step(state, eta, dt, first=cur)
            if abs(new.t - target) <= 1e-12 * max(1.0, target):
                new.t = target
            cur = _stage(new, eta)
        except DegenerateMetric as exc:
            traj.termination, traj.message = "degenerate-metric", str(exc)
            break
        state = new
        nstep += 1
        d = _diag(state, cur[3], cur[2], dt)
        traj.diagnostics.append(d)
        traj.max_boundary_residual = max(traj.max_boundary_residual, d["max_boundary_residual"])
        if monitor(d["sup_rm"] + d["sup_A"]) and traj.flag_time is None:
            traj.flag_time = state.t
        at_stop = any(abs(state.t - s) <= 1e-12 * max(1.0, s) for s in stops)
        if at_stop or (problem.snapshot_every and nstep % problem.snapshot_every == 0):
            traj.add_snapshot(state)
        if d["sup_rm"] >= problem.rm_stop:
            traj.termination = "blowup-flag" if traj.flag_time is not None else "curvature-threshold"
            traj.message = f"sup|Rm| = {d['sup_rm']:.4g} reached the stop threshold"
            break
    traj.add_snapshot(state)
    traj.final_state = state
    traj.steps = nstep
    traj.wall_time = time.perf_counter() - start
    return traj


def relative_error(state, exact):
    """max over nodes of |numeric - exact| / |exact| for phi and psi.

    ``exact`` is a state or a pair of arrays ``(phi, psi)``.
    """
    phi_x, psi_x = (exact.phi, exact.psi) if isinstance(exact, RotState) else exact
    return max(float(np.max(np.abs(state.phi - phi_x) / np.abs(phi_x))),
               float(np.max(np.abs(state.psi - psi_x) / np.abs(psi_x))))

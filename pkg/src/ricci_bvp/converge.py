"""Self-convergence on three nested grids.

Slab charts refine N0 -> 2 N0 - 1 -> 4 N0 - 3 (vertex-centred, nested) and,
optionally, Nt -> 2 Nt; fine solutions are restricted by injection.  The
radial model is cell-centred, so N0 -> 2 N0 -> 4 N0 and the restriction
averages the two fine cells inside each coarse cell.

The observed order is q = log2(|u_h - R u_{h/2}| / |u_{h/2} - R u_{h/4}|) in
the sup norm.  When both differences sit at roundoff the solution is
resolved exactly on every grid and q is not defined.
"""
from dataclasses import dataclass, field

import numpy as np

EXACT_FLOOR = 1e-12


@dataclass
class ConvergenceReport:
    resolutions: list
    diffs: dict                    # component -> (coarse diff, fine diff)
    orders: dict                   # component -> q (nan when exact)
    exact: bool
    extra: dict = field(default_factory=dict)

    @property
    def order(self):
        """Order of the sup over components."""
        c = max(d[0] for d in self.diffs.values())
        f = max(d[1] for d in self.diffs.values())
        return observed_order(c, f)

    def to_dict(self):
        return {"resolutions": self.resolutions, "exact": self.exact, "order": self.order,
                "components": {k: {"diff_coarse": self.diffs[k][0],
                                   "diff_fine": self.diffs[k][1],
                                   "order": self.orders[k]} for k in self.diffs},
                **self.extra}


def observed_order(coarse, fine, floor=EXACT_FLOOR):
    if coarse <= floor and fine <= floor:
        return float("nan")
    if fine <= 0:
        return float("inf")
    return float(np.log2(coarse / fine))


def restrict_vertex(fine, axes_refined):
    """Injection onto the nested coarse grid (every other node along refined axes)."""
    sl = tuple(slice(None, None, 2) if r else slice(None) for r in axes_refined)
    return fine[sl]


def restrict_cell(fine):
    """Pairwise average of fine cells onto the cell-centred coarse grid."""
    return 0.5 * (fine[0::2] + fine[1::2])


def slab_resolutions(N0, Nt, tangential=True):
    return [(N0, Nt), (2 * N0 - 1, 2 * Nt if tangential else Nt),
            (4 * N0 - 3, 4 * Nt if tangential else Nt)]


def _components(u, names):
    return {name: u[..., k] for k, name in enumerate(names)}


def _report(levels, names, restrict, resolutions, extra=None):
    diffs, orders = {}, {}
    for k, name in enumerate(names):
        a, b, c = (lv[..., k] for lv in levels)
        d1 = float(np.abs(a - restrict(b)).max())
        d2 = float(np.abs(b - restrict(c)).max())
        diffs[name] = (d1, d2)
        orders[name] = observed_order(d1, d2)
    exact = all(max(d) <= EXACT_FLOOR for d in diffs.values())
    return ConvergenceReport(resolutions, diffs, orders, exact, extra or {})


def converge_slab(cfg, tangential=True, run_fn=None):
    """Run a flow configuration on three nested slab grids and compare final states."""
    from .grid import packed_pairs
    from .harness import run_config
    run_fn = run_fn or run_config
    geo = cfg["geometry"]
    res = slab_resolutions(geo["N0"], geo["Nt"], tangential)
    finals, info = [], []
    for N0, Nt in res:
        traj = run_fn(cfg.with_resolution(N0, Nt))
        if traj.termination != "horizon":
            raise RuntimeError(f"run at N0={N0} ended with {traj.termination}: {traj.message}")
        finals.append(traj.snapshots[-1].values)
        info.append({"N0": N0, "Nt": Nt, "wall_time": traj.wall_time})
    m = geo["n"] + 1
    names = [f"g{i}{j}" for i, j in packed_pairs(m)]
    refined = (True,) + (tangential,) * geo["n"]
    return _report(finals, names, lambda u: restrict_vertex(u, refined),
                   [r[0] for r in res], {"runs": info})


def converge_rotsym(cfg, run_fn=None):
    """Run a radial configuration at N0, 2 N0, 4 N0 and compare phi, psi at T."""
    from .harness import run_config
    run_fn = run_fn or run_config
    N0 = cfg["geometry"]["N0"]
    res = [N0, 2 * N0, 4 * N0]
    finals, info = [], []
    for N in res:
        traj = run_fn(cfg.with_resolution(N))
        if traj.termination != "horizon":
            raise RuntimeError(f"run at N0={N} ended with {traj.termination}: {traj.message}")
        s = traj.final_state
        finals.append(np.column_stack([s.phi, s.psi]))
        info.append({"N0": N, "steps": traj.steps, "wall_time": traj.wall_time})
    return _report(finals, ["phi", "psi"], restrict_cell, res, {"runs": info})


def converge(cfg, **kwargs):
    if cfg.kind == "rotsym":
        return converge_rotsym(cfg, **kwargs)
    return converge_slab(cfg, **kwargs)

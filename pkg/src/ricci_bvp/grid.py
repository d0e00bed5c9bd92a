"""Charts, tensor fields and finite-difference stencils.

Two chart geometries are supported.

``slab``
    ``[0, 1] x T^n`` with nodes ``x0 = 0, h0, ..., 1`` in the normal
    direction and ``Nt`` periodic nodes of spacing ``ht = L / Nt`` along each
    fibre direction.  Boundary components are ``lower`` (x0 = 0) and
    ``upper`` (x0 = 1).

``ball``
    The unit (n+1)-ball in polyspherical coordinates ``(r, theta_1..theta_n)``.
    Radial nodes are cell centred, ``r_j = (j + 1/2) h0`` for
    ``j = 0..N0-1``, plus ``ghost`` extra cells beyond the face ``r = 1``
    that carry the analytic continuation of the data.  The angular
    directions are represented by a small patch of ``Nt`` nodes with spacing
    ``ht`` centred on the equator ``theta = pi/2``; only the patch centre is
    used when reporting boundary quantities.  Smoothness through ``r = 0`` is
    encoded by parity ghosts: a tensor component with ``k`` radial indices
    picks up the sign ``(-1)^k`` under ``r -> -r``.

Fields keep their components in the trailing array axes, so a metric on a
slab with ``n = 2`` is an array of shape ``(N0, Nt, Nt, 6)`` in packed
storage or ``(N0, Nt, Nt, 3, 3)`` in full storage.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import kernels

SLAB = "slab"
BALL = "ball"

RANKS = ("scalar", "vector", "covector", "sym2")


class DegenerateMetric(ValueError):
    """Raised when a metric fails to be positive definite at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


# ---------------------------------------------------------------------------
# packed symmetric storage
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def packed_pairs(m):
    """Index pairs (i, j), i <= j, in canonical packed order."""
    return tuple((i, j) for i in range(m) for j in range(i, m))


@lru_cache(maxsize=None)
def _pack_tables(m):
    pairs = packed_pairs(m)
    lookup = np.zeros((m, m), dtype=np.int64)
    for c, (i, j) in enumerate(pairs):
        lookup[i, j] = lookup[j, i] = c
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    return lookup, rows, cols


def pack_sym(full):
    """(..., m, m) -> (..., m(m+1)/2) taking the upper triangle."""
    m = full.shape[-1]
    _, rows, cols = _pack_tables(m)
    return full[..., rows, cols]


def unpack_sym(packed, m):
    lookup, _, _ = _pack_tables(m)
    return packed[..., lookup]


def n_packed(m):
    return m * (m + 1) // 2


def radial_parity(index_shape):
    """Sign ``(-1)^(number of zero indices)`` for a component array shape."""
    if len(index_shape) == 0:
        return np.ones(())
    grids = np.meshgrid(*[np.arange(k) for k in index_shape], indexing="ij")
    zeros = sum((gr == 0).astype(int) for gr in grids)
    return (-1.0) ** zeros


# ---------------------------------------------------------------------------
# Chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """Discrete chart.  Build with :meth:`slab` or :meth:`ball`."""

    kind: str
    n: int
    N0: int
    Nt: int
    h0: float
    ht: float
    L: float = 1.0
    ghost: int = 0
    accuracy: int = 2

    def __post_init__(self):
        if self.kind not in (SLAB, BALL):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.h0 <= 0 or self.ht <= 0:
            raise ValueError("grid spacings must be positive")
        if self.kind == SLAB and (self.N0 < 4 or self.Nt < 3):
            raise ValueError("slab needs N0 >= 4 and Nt >= 3")
        if self.kind == BALL and (self.N0 < 4 or self.Nt < 3 or self.Nt % 2 == 0):
            raise ValueError("ball needs N0 >= 4 and an odd patch size Nt >= 3")
        if self.accuracy not in (2, 4):
            raise ValueError("stencil accuracy must be 2 or 4")
        if self.accuracy == 4 and (self.kind == SLAB or self.Nt < 6 or self.ghost < 4):
            raise ValueError("fourth-order stencils need a ball chart with patch >= 7 "
                             "and 4 ghost layers")

    @classmethod
    def slab(cls, n, N0, Nt, L=1.0):
        return cls(SLAB, int(n), int(N0), int(Nt), 1.0 / (N0 - 1), L / Nt, float(L), 0)

    @classmethod
    def ball(cls, n, N0, patch=7, dtheta=3e-3, ghost=4, accuracy=4):
        return cls(BALL, int(n), int(N0), int(patch), 1.0 / N0, float(dtheta), 0.0, int(ghost),
                   int(accuracy))

    # -- shapes --------------------------------------------------------------
    @property
    def m(self):
        """Dimension of the manifold, n + 1."""
        return self.n + 1

    @property
    def n_radial(self):
        return self.N0 + self.ghost

    @property
    def shape(self):
        return (self.n_radial,) + (self.Nt,) * self.n

    @property
    def boundary_shape(self):
        return (self.Nt,) * self.n

    @property
    def spacings(self):
        return (self.h0,) + (self.ht,) * self.n

    @property
    def h_min(self):
        return min(self.h0, self.ht)

    @property
    def sides(self):
        return ("lower", "upper") if self.kind == SLAB else ("outer",)

    def axis_kind(self, axis):
        if not 0 <= axis < self.m:
            raise ValueError(f"axis {axis} out of range for dimension {self.m}")
        if axis == 0:
            return "bounded" if self.kind == SLAB else "radial"
        return "periodic" if self.kind == SLAB else "bounded"

    def side_sign(self, side):
        """+1 if the outward normal points towards increasing x0, else -1."""
        if side not in self.sides:
            raise ValueError(f"unknown side {side!r} for chart {self.kind}")
        return -1.0 if side == "lower" else 1.0

    # -- coordinates ---------------------------------------------------------
    def coords(self, axis):
        kind = self.axis_kind(axis)
        if axis == 0:
            if kind == "bounded":
                return np.arange(self.N0) * self.h0
            return (np.arange(self.n_radial) + 0.5) * self.h0
        if kind == "periodic":
            return np.arange(self.Nt) * self.ht
        c = (self.Nt - 1) // 2
        return np.pi / 2 + (np.arange(self.Nt) - c) * self.ht

    def node_coords(self):
        """Array of shape ``shape + (m,)`` holding the chart coordinates."""
        grids = np.meshgrid(*[self.coords(a) for a in range(self.m)], indexing="ij")
        return np.stack(grids, axis=-1)

    @property
    def patch_center(self):
        return (self.Nt - 1) // 2

    def report_index(self):
        """Index into boundary arrays selecting the nodes used for reports."""
        if self.kind == SLAB:
            return (Ellipsis,)
        return (self.patch_center,) * self.n

    def interior_slice(self):
        """Slice along axis 0 of nodes advanced by the interior update."""
        if self.kind == SLAB:
            return slice(1, self.N0 - 1)
        return slice(0, self.N0)

    def summary(self):
        return {"kind": self.kind, "n": self.n, "N0": self.N0, "Nt": self.Nt,
                "h0": self.h0, "ht": self.ht, "L": self.L, "ghost": self.ghost,
                "accuracy": self.accuracy}


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------

def _diff_front(a, h, order, kind, parity):
    """Differentiate along axis 0 of ``a``; ``parity`` broadcasts over the
    trailing component axes and is only used for radial axes."""
    out = np.empty_like(a, dtype=float)
    if kind == "periodic":
        if order == 1:
            out[...] = (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) / (2 * h)
        else:
            out[...] = (np.roll(a, -1, axis=0) - 2 * a + np.roll(a, 1, axis=0)) / h**2
        return out
    if order == 1:
        out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
        out[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
        if kind == "radial":
            out[0] = (a[1] - parity * a[0]) / (2 * h)
        else:
            out[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
    else:
        out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
        out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
        if kind == "radial":
            out[0] = (a[1] - 2 * a[0] + parity * a[0]) / h**2
        else:
            out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
    return out


# fourth-order one-sided weights at the first two nodes (mirror for the last two)
_D1_EDGE4 = np.array([[-25.0, 48.0, -36.0, 16.0, -3.0, 0.0],
                      [-3.0, -10.0, 18.0, -6.0, 1.0, 0.0]]) / 12.0
_D2_EDGE4 = np.array([[45.0, -154.0, 214.0, -156.0, 61.0, -10.0],
                      [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]]) / 12.0


def _diff_front4(a, h, order, kind, parity):
    """Fourth-order version of :func:`_diff_front`."""
    if kind == "periodic":
        r = [np.roll(a, -k, axis=0) for k in (-2, -1, 0, 1, 2)]
        if order == 1:
            return (r[0] - 8 * r[1] + 8 * r[3] - r[4]) / (12 * h)
        return (-r[0] + 16 * r[1] - 30 * r[2] + 16 * r[3] - r[4]) / (12 * h**2)
    if kind == "radial":
        a = np.concatenate([parity * a[1::-1], a], axis=0)
    out = np.empty_like(a, dtype=float)
    if order == 1:
        out[2:-2] = (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)
        w, sgn = _D1_EDGE4, -1.0
    else:
        out[2:-2] = (-a[:-4] + 16 * a[1:-3] - 30 * a[2:-2] + 16 * a[3:-1] - a[4:]) / (12 * h**2)
        w, sgn = _D2_EDGE4, 1.0
    scale = h if order == 1 else h**2
    for k in range(2):
        out[k] = np.tensordot(w[k], a[:6], axes=(0, 0)) / scale
        out[-1 - k] = sgn * np.tensordot(w[k], a[::-1][:6], axes=(0, 0)) / scale
    return out[2:] if kind == "radial" else out


def diff(chart, arr, axis, order=1, parity=None):
    """Finite-difference derivative of a raw array along a chart axis.

    ``arr`` has shape ``chart.shape + comp_shape``.  ``parity`` gives the
    sign of each component under ``r -> -r`` (only consulted on radial axes;
    defaults to even).
    """
    kind = chart.axis_kind(axis)
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if parity is None:
        parity = 1.0
    a = np.moveaxis(np.asarray(arr, dtype=float), axis, 0)
    front = _diff_front4 if chart.accuracy == 4 else _diff_front
    d = front(a, chart.spacings[axis], order, kind, parity)
    return np.moveaxis(d, 0, axis)


def diff_boundary(chart, arr, axis, order=1):
    """Tangential derivative of a boundary array of shape ``boundary_shape + comp``.

    ``axis`` is the chart axis (1..n).
    """
    kind = chart.axis_kind(axis)
    if axis == 0:
        raise ValueError("boundary arrays have no normal axis")
    a = np.moveaxis(np.asarray(arr, dtype=float), axis - 1, 0)
    front = _diff_front4 if chart.accuracy == 4 else _diff_front
    d = front(a, chart.ht, order, kind, 1.0)
    return np.moveaxis(d, 0, axis - 1)


# weights for the face r = 1 of a ball from nodes N0-2 .. N0+1
_FACE_VALUE = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
_FACE_DERIV = np.array([1.0, -27.0, 27.0, -1.0]) / 24.0


def boundary_value(chart, arr, side):
    """Trace of a raw array on a boundary component."""
    arr = np.asarray(arr, dtype=float)
    if chart.kind == SLAB:
        chart.side_sign(side)
        return arr[0] if side == "lower" else arr[chart.N0 - 1]
    chart.side_sign(side)
    k = chart.N0
    return np.tensordot(_FACE_VALUE, arr[k - 2:k + 2], axes=(0, 0))


def boundary_normal_derivative(chart, arr, side):
    """d/dx0 (not the outward derivative) of a raw array on a boundary."""
    arr = np.asarray(arr, dtype=float)
    h = chart.h0
    if chart.kind == SLAB:
        chart.side_sign(side)
        if side == "lower":
            return (-3 * arr[0] + 4 * arr[1] - arr[2]) / (2 * h)
        k = chart.N0 - 1
        return (3 * arr[k] - 4 * arr[k - 1] + arr[k - 2]) / (2 * h)
    chart.side_sign(side)
    k = chart.N0
    return np.tensordot(_FACE_DERIV, arr[k - 2:k + 2], axes=(0, 0)) / h


def boundary_jet(chart, arr, side):
    """(value, d0 value, [d_alpha value]) of ``arr`` on a boundary component.

    The tangential derivatives are taken of the trace.  Returns the first
    jet with ``dfull[..., k, ...]`` stacked along a new axis right after the
    boundary node axes.
    """
    val = boundary_value(chart, arr, side)
    d0 = boundary_normal_derivative(chart, arr, side)
    parts = [d0] + [diff_boundary(chart, val, a) for a in range(1, chart.m)]
    nb = len(chart.boundary_shape)
    return val, np.stack(parts, axis=nb)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

def _ncomp(rank, m):
    if rank == "scalar":
        return 1
    if rank in ("vector", "covector"):
        return m
    if rank == "sym2":
        return n_packed(m)
    raise ValueError(f"unknown rank {rank!r}")


class SymTensorField:
    """A scalar, vector, one-form or symmetric 2-tensor field on a chart.

    ``values`` has shape ``chart.shape + (ncomp,)``; symmetric 2-tensors use
    the packed order of :func:`packed_pairs`.
    """

    def __init__(self, chart, rank, values):
        self.chart = chart
        self.rank = rank
        ncomp = _ncomp(rank, chart.m)
        values = np.asarray(values, dtype=float)
        if values.shape != chart.shape + (ncomp,):
            raise ValueError(f"{rank} field on {chart.shape} needs values of shape "
                             f"{chart.shape + (ncomp,)}, got {values.shape}")
        self.values = values

    @property
    def ncomp(self):
        return self.values.shape[-1]

    @classmethod
    def zeros(cls, chart, rank):
        return cls(chart, rank, np.zeros(chart.shape + (_ncomp(rank, chart.m),)))

    @classmethod
    def from_full(cls, chart, rank, arr):
        arr = np.asarray(arr, dtype=float)
        if rank == "sym2":
            return cls(chart, rank, pack_sym(arr))
        if rank == "scalar":
            return cls(chart, rank, arr[..., None])
        return cls(chart, rank, arr)

    def _index(self, i, j):
        m = self.chart.m
        if self.rank == "sym2":
            if j is None:
                raise ValueError("symmetric 2-tensor needs two indices")
            lookup, _, _ = _pack_tables(m)
            return lookup[i, j]
        if self.rank == "scalar":
            return 0
        return i

    def get(self, i=0, j=None):
        return self.values[..., self._index(i, j)]

    def set(self, i, j, v):
        """Assign a component in place (construction only)."""
        self.values[..., self._index(i, j)] = v

    def full(self):
        if self.rank == "sym2":
            return unpack_sym(self.values, self.chart.m)
        if self.rank == "scalar":
            return self.values[..., 0]
        return self.values

    def parity(self):
        """Radial parity of each stored component."""
        m = self.chart.m
        if self.rank == "sym2":
            return np.array([(-1.0) ** ((i == 0) + (j == 0)) for i, j in packed_pairs(m)])
        if self.rank == "scalar":
            return np.ones(1)
        return np.array([-1.0 if i == 0 else 1.0 for i in range(m)])

    def copy(self):
        return type(self)(self.chart, self.rank, self.values.copy())


def partial_derivative(f, axis, order=1):
    """Componentwise coordinate derivative of a field."""
    if not isinstance(axis, (int, np.integer)) or not 0 <= axis < f.chart.m:
        raise ValueError(f"axis {axis} out of range")
    vals = diff(f.chart, f.values, axis, order, parity=f.parity())
    # a derivative along the radial axis flips the parity, which matters only
    # if the result is differentiated again; results are plain fields here
    return SymTensorField(f.chart, f.rank, vals)


def _axis_tables(chart):
    dims = np.array(chart.shape, dtype=np.int64)
    x0 = np.array([chart.coords(a)[0] for a in range(chart.m)])
    h = np.array(chart.spacings, dtype=float)
    periodic = np.array([chart.axis_kind(a) == "periodic" for a in range(chart.m)])
    return dims, x0, h, periodic


def interp_values(chart, values, points):
    """Multilinear interpolation of a raw array ``shape + comp`` at points.

    ``points`` has shape (P, m) or (m,).  Non-periodic coordinates must lie
    within the node range (ghost cells of a ball excluded).
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    pts = np.atleast_2d(points)
    if pts.shape[-1] != chart.m:
        raise ValueError("point dimension does not match chart")
    dims, x0, h, periodic = _axis_tables(chart)
    limits_hi = x0 + (dims - 1) * h
    if chart.kind == BALL:
        limits_hi[0] = chart.coords(0)[chart.N0 - 1]
    tol = 1e-12
    for a in range(chart.m):
        if periodic[a]:
            continue
        bad = (pts[:, a] < x0[a] - tol) | (pts[:, a] > limits_hi[a] + tol)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ValueError(f"point {pts[k]} outside chart range along axis {a}")
    comp = values.shape[len(chart.shape):]
    flat = np.ascontiguousarray(values.reshape(int(np.prod(chart.shape)), -1))
    out = kernels.interp_multilinear(flat, dims, x0, h, periodic, np.ascontiguousarray(pts))
    out = out.reshape((pts.shape[0],) + comp)
    return out[0] if single else out


def interpolate(f, point):
    """Value of a field at continuous coordinates (multilinear)."""
    return interp_values(f.chart, f.values, point)


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

def _first_bad_node(full):
    m = full.shape[-1]
    flat = full.reshape(-1, m, m)
    bad = ~np.all(np.isfinite(flat), axis=(1, 2))
    ok = np.where(bad)[0]
    if ok.size == 0:
        ev = np.linalg.eigvalsh(flat)[:, 0]
        ok = np.where(ev <= 0)[0]
    if ok.size == 0:
        return None
    return tuple(int(i) for i in np.unravel_index(ok[0], full.shape[:-2]))


def check_positive(full):
    """Raise :class:`DegenerateMetric` unless every node is SPD."""
    try:
        if not np.all(np.isfinite(full)):
            raise np.linalg.LinAlgError
        np.linalg.cholesky(full)
    except np.linalg.LinAlgError:
        node = _first_bad_node(full)
        raise DegenerateMetric(f"metric not positive definite at node {node}", node) from None


class MetricField(SymTensorField):
    """A positive-definite symmetric 2-tensor with cached full form and inverse."""

    def __init__(self, chart, values):
        super().__init__(chart, "sym2", values)
        check_positive(self.full())

    @classmethod
    def from_full(cls, chart, arr):
        return cls(chart, pack_sym(np.asarray(arr, dtype=float)))

    @classmethod
    def from_tensor(cls, field):
        return cls(field.chart, field.values)

    @cached_property
    def _full(self):
        return unpack_sym(self.values, self.chart.m)

    def full(self):
        return self._full

    @cached_property
    def inv(self):
        gi = np.linalg.inv(self._full)
        return 0.5 * (gi + np.swapaxes(gi, -1, -2))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self._full)[..., 0].min())

    def copy(self):
        return MetricField(self.chart, self.values.copy())


def flat_metric(chart, scale=1.0):
    full = np.broadcast_to(scale * np.eye(chart.m), chart.shape + (chart.m, chart.m))
    return MetricField.from_full(chart, full.copy())


def metric_from_function(chart, fn):
    """Sample ``fn(x) -> (..., m, m)`` at the node coordinates."""
    return MetricField.from_full(chart, fn(chart.node_coords()))


# ---------------------------------------------------------------------------
# snapshot CSV
# ---------------------------------------------------------------------------

def snapshot_header(chart, t):
    return f"# chart={chart.kind} n={chart.n} N0={chart.N0} Nt={chart.Nt} t={t!r}"


def write_snapshot(path, field, t):
    """Write a field in the node-per-row CSV snapshot format."""
    chart = field.chart
    idx = np.indices(chart.shape).reshape(chart.m, -1).T
    vals = field.values.reshape(-1, field.ncomp)
    names = [f"i{a}" for a in range(chart.m)] + [f"c{k}" for k in range(field.ncomp)]
    with open(path, "w", newline="\n") as fh:
        fh.write(snapshot_header(chart, t) + f" rank={field.rank}\n")
        fh.write(",".join(names) + "\n")
        for ij, row in zip(idx, vals):
            fh.write(",".join(str(int(k)) for k in ij) + ","
                     + ",".join(f"{v:.17g}" for v in row) + "\n")


def read_snapshot(path, chart):
    """Read a snapshot written by :func:`write_snapshot` on a known chart."""
    with open(path) as fh:
        header = fh.readline().split()
        fh.readline()
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    meta = dict(tok.split("=", 1) for tok in header[1:])
    if meta["chart"] != chart.kind or int(meta["N0"]) != chart.N0 or int(meta["Nt"]) != chart.Nt:
        raise ValueError(f"snapshot {path} does not match chart {chart.summary()}")
    rank = meta.get("rank", "sym2")
    idx = data[:, :chart.m].astype(int)
    vals = np.zeros(chart.shape + (_ncomp(rank, chart.m),))
    vals[tuple(idx.T)] = data[:, chart.m:]
    field = SymTensorField(chart, rank, vals)
    return field, float(meta["t"])

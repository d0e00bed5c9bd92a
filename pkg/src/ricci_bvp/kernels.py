"""Hot loops, each in a numba flavour and a vectorised numpy flavour.

The public names at the bottom of this module point at the numba version
when :data:`ricci_bvp._backend.USE_NUMBA` is true and at the numpy version
otherwise.  Both flavours are importable under their suffixed names so the
test-suite and the benchmark can compare them directly.
"""
import numpy as np

from ._backend import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# multilinear interpolation
# ---------------------------------------------------------------------------

def _axis_locate_numpy(x, n_nodes, x0, h, periodic):
    s = (x - x0) / h
    if periodic:
        s = np.mod(s, n_nodes)
    r = np.rint(s)
    s = np.where(np.abs(s - r) < 1e-12, r, s)
    if periodic:
        i0 = np.floor(s).astype(np.int64) % n_nodes
        w = s - np.floor(s)
        i1 = (i0 + 1) % n_nodes
    else:
        i0 = np.minimum(np.floor(s).astype(np.int64), n_nodes - 2)
        w = s - i0
        i1 = i0 + 1
    return i0, i1, w


def interp_multilinear_numpy(values, dims, x0, h, periodic, points):
    """Multilinear interpolation of ``values`` (nnodes, ncomp) at ``points``.

    ``dims``, ``x0``, ``h`` and ``periodic`` describe the tensor-product grid
    axis by axis; ``values`` is the C-ordered flattening over the grid.
    Points are assumed to be inside the non-periodic ranges.
    """
    npts, d = points.shape
    locs = [_axis_locate_numpy(points[:, a], dims[a], x0[a], h[a], periodic[a])
            for a in range(d)]
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * dims[a + 1]
    out = np.zeros((npts, values.shape[1]))
    for corner in range(1 << d):
        flat = np.zeros(npts, dtype=np.int64)
        wt = np.ones(npts)
        for a in range(d):
            i0, i1, w = locs[a]
            if (corner >> a) & 1:
                flat += i1 * strides[a]
                wt = wt * w
            else:
                flat += i0 * strides[a]
                wt = wt * (1.0 - w)
        out += wt[:, None] * values[flat]
    return out


@njit(cache=True)
def interp_multilinear_numba(values, dims, x0, h, periodic, points):
    npts, d = points.shape
    ncomp = values.shape[1]
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * dims[a + 1]
    out = np.zeros((npts, ncomp))
    i0 = np.zeros(d, dtype=np.int64)
    i1 = np.zeros(d, dtype=np.int64)
    w = np.zeros(d)
    for p in range(npts):
        for a in range(d):
            s = (points[p, a] - x0[a]) / h[a]
            if periodic[a]:
                s = s % dims[a]
            r = np.floor(s + 0.5)
            if abs(s - r) < 1e-12:
                s = r
            fl = np.floor(s)
            if periodic[a]:
                i0[a] = int(fl) % dims[a]
                w[a] = s - fl
                i1[a] = (i0[a] + 1) % dims[a]
            else:
                k = int(fl)
                if k > dims[a] - 2:
                    k = dims[a] - 2
                i0[a] = k
                w[a] = s - k
                i1[a] = k + 1
        for corner in range(1 << d):
            flat = 0
            wt = 1.0
            for a in range(d):
                if (corner >> a) & 1:
                    flat += i1[a] * strides[a]
                    wt *= w[a]
                else:
                    flat += i0[a] * strides[a]
                    wt *= 1.0 - w[a]
            for c in range(ncomp):
                out[p, c] += wt * values[flat, c]
    return out


# ---------------------------------------------------------------------------
# pointwise tensor algebra
# ---------------------------------------------------------------------------

def christoffel_numpy(gi, dg):
    """Gamma^r_pq = 1/2 g^rs (d_p g_qs + d_q g_ps - d_s g_pq)."""
    low = 0.5 * (np.einsum("...pqs->...spq", dg) + np.einsum("...qps->...spq", dg)
                 - dg)
    return np.einsum("...rs,...spq->...rpq", gi, low)


@njit(cache=True)
def _christoffel_flat(gi, dg):
    npts, m, _ = gi.shape
    out = np.zeros((npts, m, m, m))
    low = np.zeros((m, m, m))
    for n in range(npts):
        for s in range(m):
            for p in range(m):
                for q in range(p, m):
                    v = 0.5 * (dg[n, p, q, s] + dg[n, q, p, s] - dg[n, s, p, q])
                    low[s, p, q] = v
                    low[s, q, p] = v
        for r in range(m):
            for p in range(m):
                for q in range(p, m):
                    acc = 0.0
                    for s in range(m):
                        acc += gi[n, r, s] * low[s, p, q]
                    out[n, r, p, q] = acc
                    out[n, r, q, p] = acc
    return out


def christoffel_numba(gi, dg):
    m = gi.shape[-1]
    lead = gi.shape[:-2]
    out = _christoffel_flat(np.ascontiguousarray(gi).reshape(-1, m, m),
                            np.ascontiguousarray(dg).reshape(-1, m, m, m))
    return out.reshape(lead + (m, m, m))


def ricci_from_gamma_numpy(gam, dgam):
    """Ric from Gamma and dgam[..., k, r, p, q] = d_k Gamma^r_pq (unsymmetrised)."""
    return (np.einsum("...kkij->...ij", dgam) - np.einsum("...ikkj->...ij", dgam)
            + np.einsum("...kkl,...lij->...ij", gam, gam)
            - np.einsum("...kil,...lkj->...ij", gam, gam))


@njit(cache=True)
def _ricci_flat(gam, dgam):
    npts, m = gam.shape[0], gam.shape[1]
    out = np.zeros((npts, m, m))
    for n in range(npts):
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for k in range(m):
                    acc += dgam[n, k, k, i, j] - dgam[n, i, k, k, j]
                for k in range(m):
                    for l in range(m):
                        acc += gam[n, k, k, l] * gam[n, l, i, j] - gam[n, k, i, l] * gam[n, l, k, j]
                out[n, i, j] = acc
    return out


def ricci_from_gamma_numba(gam, dgam):
    m = gam.shape[-1]
    lead = gam.shape[:-3]
    out = _ricci_flat(np.ascontiguousarray(gam).reshape(-1, m, m, m),
                      np.ascontiguousarray(dgam).reshape(-1, m, m, m, m))
    return out.reshape(lead + (m, m))


def rm_norm_sq_numpy(gi, rm):
    up = np.einsum("...ia,...jb,...kc,...ld,...abcd->...ijkl", gi, gi, gi, gi, rm,
                   optimize=True)
    return np.einsum("...ijkl,...ijkl->...", up, rm)


@njit(cache=True)
def _rm_norm_flat(gi, rm):
    npts, m = gi.shape[0], gi.shape[1]
    out = np.zeros(npts)
    t1 = np.zeros((m, m, m, m))
    t2 = np.zeros((m, m, m, m))
    for n in range(npts):
        # raise indices one at a time
        for i in range(m):
            for b in range(m):
                for c in range(m):
                    for d in range(m):
                        acc = 0.0
                        for a in range(m):
                            acc += gi[n, i, a] * rm[n, a, b, c, d]
                        t1[i, b, c, d] = acc
        for i in range(m):
            for j in range(m):
                for c in range(m):
                    for d in range(m):
                        acc = 0.0
                        for b in range(m):
                            acc += gi[n, j, b] * t1[i, b, c, d]
                        t2[i, j, c, d] = acc
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    for d in range(m):
                        acc = 0.0
                        for c in range(m):
                            acc += gi[n, k, c] * t2[i, j, c, d]
                        t1[i, j, k, d] = acc
        tot = 0.0
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    for l in range(m):
                        acc = 0.0
                        for d in range(m):
                            acc += gi[n, l, d] * t1[i, j, k, d]
                        tot += acc * rm[n, i, j, k, l]
        out[n] = tot
    return out


def rm_norm_sq_numba(gi, rm):
    m = gi.shape[-1]
    lead = gi.shape[:-2]
    out = _rm_norm_flat(np.ascontiguousarray(gi).reshape(-1, m, m),
                        np.ascontiguousarray(rm).reshape(-1, m, m, m, m))
    return out.reshape(lead)


# ---------------------------------------------------------------------------
# rotationally symmetric right-hand side
# ---------------------------------------------------------------------------

def rot_rhs_numpy(phi, w, psi, h, n):
    """Warped-product Ricci flow in the variables (phi, w = d_s psi).

    ``phi`` and ``w`` carry one ghost node at each end; ``psi`` is given on
    the inner nodes only.  Returns ``(dphi, dw, dpsi, rm_sq)`` on the inner
    nodes, where

        phi_t = n w_r / psi,
        w_t   = w_ss + (n - 2) w w_s / psi + (n - 1) (1 - w^2) w / psi^2,
        psi_t = w_s - (n - 1) (1 - w^2) / psi.
    """
    pc, wc = phi[1:-1], w[1:-1]
    fp = 0.5 * (phi[2:] + pc)
    fm = 0.5 * (phi[:-2] + pc)
    wr = (w[2:] - w[:-2]) / (2 * h)
    wss = ((w[2:] - wc) / fp - (wc - w[:-2]) / fm) / (h * h * pc)
    ws = wr / pc
    tan = (1.0 - wc * wc) / psi
    dphi = n * wr / psi
    dw = wss + (n - 2) * wc * ws / psi + (n - 1) * tan * wc / psi
    dpsi = ws - (n - 1) * tan
    krad = -ws / psi
    ktan = tan / psi
    rm_sq = 4.0 * (n * krad**2 + 0.5 * n * (n - 1) * ktan**2)
    return dphi, dw, dpsi, rm_sq


@njit(cache=True)
def rot_rhs_numba(phi, w, psi, h, n):
    N = phi.shape[0] - 2
    dphi = np.empty(N)
    dw = np.empty(N)
    dpsi = np.empty(N)
    rm_sq = np.empty(N)
    for j in range(1, N + 1):
        pc = phi[j]
        wc = w[j]
        q = psi[j - 1]
        fp = 0.5 * (phi[j + 1] + pc)
        fm = 0.5 * (phi[j - 1] + pc)
        wr = (w[j + 1] - w[j - 1]) / (2 * h)
        wss = ((w[j + 1] - wc) / fp - (wc - w[j - 1]) / fm) / (h * h * pc)
        ws = wr / pc
        tan = (1.0 - wc * wc) / q
        dphi[j - 1] = n * wr / q
        dw[j - 1] = wss + (n - 2) * wc * ws / q + (n - 1) * tan * wc / q
        dpsi[j - 1] = ws - (n - 1) * tan
        krad = -ws / q
        ktan = tan / q
        rm_sq[j - 1] = 4.0 * (n * krad * krad + 0.5 * n * (n - 1) * ktan * ktan)
    return dphi, dw, dpsi, rm_sq


# ---------------------------------------------------------------------------
# small dense determinant (LU with partial pivoting)
# ---------------------------------------------------------------------------

def _cdiv(x, y):
    # complex division spelled out so both flavours round identically
    d = y.real * y.real + y.imag * y.imag
    return complex((x.real * y.real + x.imag * y.imag) / d,
                   (x.imag * y.real - x.real * y.imag) / d)


@njit(cache=True)
def _cdiv_compiled(x, y):
    d = y.real * y.real + y.imag * y.imag
    return complex((x.real * y.real + x.imag * y.imag) / d,
                   (x.imag * y.real - x.real * y.imag) / d)


def lu_det_numpy(a):
    """Determinant of a small complex matrix by Doolittle LU with partial pivoting.

    Written as scalar loops so the value is reproducible bit for bit across
    platforms and identical to the compiled flavour.
    """
    a = [list(row) for row in np.asarray(a, dtype=complex)]
    n = len(a)
    det = 1.0 + 0.0j
    for k in range(n):
        piv = k
        best = abs(a[k][k])
        for i in range(k + 1, n):
            if abs(a[i][k]) > best:
                best = abs(a[i][k])
                piv = i
        if best == 0.0:
            return 0.0j
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        det = det * a[k][k]
        for i in range(k + 1, n):
            f = _cdiv(a[i][k], a[k][k])
            for j in range(k + 1, n):
                a[i][j] = a[i][j] - f * a[k][j]
    return complex(det)


@njit(cache=True)
def _lu_det_compiled(a):
    a = a.copy()
    n = a.shape[0]
    det = 1.0 + 0.0j
    for k in range(n):
        piv = k
        best = abs(a[k, k])
        for i in range(k + 1, n):
            if abs(a[i, k]) > best:
                best = abs(a[i, k])
                piv = i
        if best == 0.0:
            return 0.0j
        if piv != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[piv, j]
                a[piv, j] = tmp
            det = -det
        det = det * a[k, k]
        for i in range(k + 1, n):
            f = _cdiv_compiled(a[i, k], a[k, k])
            for j in range(k + 1, n):
                a[i, j] = a[i, j] - f * a[k, j]
    return det


def lu_det_numba(a):
    return complex(_lu_det_compiled(np.ascontiguousarray(a, dtype=np.complex128)))


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

_KERNELS = ("interp_multilinear", "christoffel", "ricci_from_gamma", "rm_norm_sq", "rot_rhs",
            "lu_det")


def select(use_numba):
    """Rebind the public kernel names to one backend."""
    g = globals()
    suffix = "_numba" if use_numba else "_numpy"
    for name in _KERNELS:
        g[name] = g[name + suffix]


select(USE_NUMBA)

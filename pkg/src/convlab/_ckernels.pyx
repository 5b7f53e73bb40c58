# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: delta-kernel coupling, compensated sums, advection.

Every function here has a numpy twin in ``_pykernels`` with the same
signature; ``_backend`` picks one at import time.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt

cnp.import_array()


cdef inline double _phi(double r) noexcept nogil:
    cdef double a = fabs(r)
    if a < 1.0:
        return 0.125 * (3.0 - 2.0 * a + sqrt(1.0 + 4.0 * a - 4.0 * a * a))
    if a < 2.0:
        return 0.125 * (5.0 - 2.0 * a - sqrt(-7.0 + 12.0 * a - 4.0 * a * a))
    return 0.0


def delta_phi(r):
    """Four-point kernel evaluated elementwise; accepts scalars or arrays."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat
    cdef Py_ssize_t k, n
    arr = np.asarray(r, dtype=np.float64)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    cdef double[::1] o = out
    n = flat.shape[0]
    for k in range(n):
        o[k] = _phi(flat[k])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


cdef inline void _stencil(double xs, double h, double length, Py_ssize_t n,
                          Py_ssize_t* idx, double* w) noexcept nogil:
    cdef double s, r
    cdef Py_ssize_t base, q, m
    s = xs - length * floor(xs / length)
    s = s / h
    base = <Py_ssize_t>floor(s) - 1
    for q in range(4):
        r = s - <double>(base + q)
        w[q] = _phi(r)
        m = (base + q) % n
        if m < 0:
            m += n
        idx[q] = m


def spread(double[::1] X, double[::1] Y, double[::1] fx, double[::1] fy,
           double[::1] weight, Py_ssize_t n, double h):
    """Spread per-node force densities times ``weight`` (ds) onto an n x n grid."""
    cdef Py_ssize_t s, a, b, nn = X.shape[0]
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double wy[4]
    cdef double length = n * h, scale = 1.0 / (h * h), c, gx, gy
    Fx_arr = np.zeros((n, n), dtype=np.float64)
    Fy_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] Fx = Fx_arr
    cdef double[:, ::1] Fy = Fy_arr
    with nogil:
        for s in range(nn):
            _stencil(X[s], h, length, n, ix, wx)
            _stencil(Y[s], h, length, n, iy, wy)
            gx = fx[s] * weight[s] * scale
            gy = fy[s] * weight[s] * scale
            for a in range(4):
                for b in range(4):
                    c = wx[a] * wy[b]
                    Fx[ix[a], iy[b]] += gx * c
                    Fy[ix[a], iy[b]] += gy * c
    return Fx_arr, Fy_arr


def interp(double[:, ::1] u, double[:, ::1] v, double[::1] X, double[::1] Y,
           double h):
    """Interpolate grid velocities to the nodes with the same stencil as spread."""
    cdef Py_ssize_t s, a, b, nn = X.shape[0], n = u.shape[0]
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double wy[4]
    cdef double length = n * h, c, su, sv
    U_arr = np.empty(nn, dtype=np.float64)
    V_arr = np.empty(nn, dtype=np.float64)
    cdef double[::1] U = U_arr
    cdef double[::1] V = V_arr
    with nogil:
        for s in range(nn):
            _stencil(X[s], h, length, n, ix, wx)
            _stencil(Y[s], h, length, n, iy, wy)
            su = 0.0
            sv = 0.0
            for a in range(4):
                for b in range(4):
                    c = wx[a] * wy[b]
                    su = su + u[ix[a], iy[b]] * c
                    sv = sv + v[ix[a], iy[b]] * c
            U[s] = su
            V[s] = sv
    return U_arr, V_arr


def neumaier_sum(double[::1] values, double total=0.0, double comp=0.0):
    """Continue a Neumaier compensated sum; returns the updated (total, comp)."""
    cdef Py_ssize_t k, n = values.shape[0]
    cdef double x, t
    with nogil:
        for k in range(n):
            x = values[k]
            t = total + x
            if fabs(total) >= fabs(x):
                comp += (total - t) + x
            else:
                comp += (x - t) + total
            total = t
    return total, comp


def advect_skew(double[:, ::1] u, double[:, ::1] v, double h):
    """Skew-symmetric centered advection 0.5*(U.grad U + div(U U)), periodic."""
    cdef Py_ssize_t n = u.shape[0], i, j, ip, im, jp, jm
    cdef double inv = 1.0 / (2.0 * h), uc, vc
    Au_arr = np.empty((n, n), dtype=np.float64)
    Av_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] Au = Au_arr
    cdef double[:, ::1] Av = Av_arr
    with nogil:
        for i in range(n):
            ip = i + 1
            if ip == n:
                ip = 0
            im = i - 1
            if im < 0:
                im = n - 1
            for j in range(n):
                jp = j + 1
                if jp == n:
                    jp = 0
                jm = j - 1
                if jm < 0:
                    jm = n - 1
                uc = u[i, j]
                vc = v[i, j]
                Au[i, j] = 0.5 * inv * (
                    uc * (u[ip, j] - u[im, j]) + vc * (u[i, jp] - u[i, jm])
                    + (u[ip, j] * u[ip, j] - u[im, j] * u[im, j])
                    + (v[i, jp] * u[i, jp] - v[i, jm] * u[i, jm]))
                Av[i, j] = 0.5 * inv * (
                    uc * (v[ip, j] - v[im, j]) + vc * (v[i, jp] - v[i, jm])
                    + (u[ip, j] * v[ip, j] - u[im, j] * v[im, j])
                    + (v[i, jp] * v[i, jp] - v[i, jm] * v[i, jm]))
    return Au_arr, Av_arr


def spring_accumulate(double[:, ::1] X, cnp.int64_t[::1] master, cnp.int64_t[::1] slave,
                      double[::1] k, double[::1] rest, bint tension_only,
                      double[:, ::1] out):
    """Add linear spring forces into ``out``; returns the first coincident pair index or -1."""
    cdef Py_ssize_t q, m, s, nc = master.shape[0], bad = -1
    cdef double dx, dy, dist, c
    with nogil:
        for q in range(nc):
            m = master[q]
            s = slave[q]
            dx = X[s, 0] - X[m, 0]
            dy = X[s, 1] - X[m, 1]
            dist = sqrt(dx * dx + dy * dy)
            if dist == 0.0:
                bad = q
                break
            c = 1.0 - rest[q] / dist
            if tension_only and c < 0.0:
                c = 0.0
            c = k[q] * c
            out[m, 0] += c * dx
            out[m, 1] += c * dy
            out[s, 0] -= c * dx
            out[s, 1] -= c * dy
    return bad


def beam_accumulate(double[:, ::1] X, cnp.int64_t[::1] left, cnp.int64_t[::1] mid,
                    cnp.int64_t[::1] right, double[::1] k, double[:, ::1] curv,
                    double[:, ::1] out):
    """Add bending forces -kD, 2kD, -kD with D = X_L - 2 X_M + X_R - C."""
    cdef Py_ssize_t q, a, b, c, nc = mid.shape[0]
    cdef double dx, dy
    with nogil:
        for q in range(nc):
            a = left[q]
            b = mid[q]
            c = right[q]
            dx = k[q] * (X[a, 0] - 2.0 * X[b, 0] + X[c, 0] - curv[q, 0])
            dy = k[q] * (X[a, 1] - 2.0 * X[b, 1] + X[c, 1] - curv[q, 1])
            out[a, 0] -= dx
            out[a, 1] -= dy
            out[b, 0] += 2.0 * dx
            out[b, 1] += 2.0 * dy
            out[c, 0] -= dx
            out[c, 1] -= dy


def target_accumulate(double[:, ::1] X, cnp.int64_t[::1] index, double[::1] k,
                      double[:, ::1] anchor, double[:, ::1] out):
    """Add penalty forces k (Y - X)."""
    cdef Py_ssize_t q, i, nc = index.shape[0]
    with nogil:
        for q in range(nc):
            i = index[q]
            out[i, 0] += k[q] * (anchor[q, 0] - X[i, 0])
            out[i, 1] += k[q] * (anchor[q, 1] - X[i, 1])

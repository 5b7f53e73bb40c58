"""Numpy implementations of the compiled kernels in ``_ckernels``."""
import math

import numpy as np


def delta_phi(r):
    """Four-point kernel evaluated elementwise; accepts scalars or arrays."""
    arr = np.asarray(r, dtype=np.float64)
    a = np.abs(arr)
    out = np.zeros_like(a)
    inner = a < 1.0
    outer = (a >= 1.0) & (a < 2.0)
    ai = a[inner]
    ao = a[outer]
    out[inner] = 0.125 * (3.0 - 2.0 * ai + np.sqrt(1.0 + 4.0 * ai - 4.0 * ai * ai))
    out[outer] = 0.125 * (5.0 - 2.0 * ao - np.sqrt(-7.0 + 12.0 * ao - 4.0 * ao * ao))
    if arr.ndim == 0:
        return float(out)
    return out


def _stencil(xs, h, n):
    length = n * h
    s = (xs - length * np.floor(xs / length)) / h
    base = np.floor(s).astype(np.int64) - 1
    offsets = np.arange(4)
    cells = base[:, None] + offsets[None, :]
    w = delta_phi(s[:, None] - cells)
    return cells % n, w


def spread(X, Y, fx, fy, weight, n, h):
    """Spread per-node force densities times ``weight`` (ds) onto an n x n grid."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    ix, wx = _stencil(X, h, n)
    iy, wy = _stencil(Y, h, n)
    c = wx[:, :, None] * wy[:, None, :]
    flat = (ix[:, :, None] * n + iy[:, None, :]).ravel()
    scale = np.asarray(weight, dtype=np.float64) / (h * h)
    gx = (np.asarray(fx) * scale)[:, None, None] * c
    gy = (np.asarray(fy) * scale)[:, None, None] * c
    Fx = np.bincount(flat, weights=gx.ravel(), minlength=n * n).reshape(n, n)
    Fy = np.bincount(flat, weights=gy.ravel(), minlength=n * n).reshape(n, n)
    return Fx, Fy


def interp(u, v, X, Y, h):
    """Interpolate grid velocities to the nodes with the same stencil as spread."""
    n = u.shape[0]
    ix, wx = _stencil(np.asarray(X, dtype=np.float64), h, n)
    iy, wy = _stencil(np.asarray(Y, dtype=np.float64), h, n)
    c = wx[:, :, None] * wy[:, None, :]
    gu = u[ix[:, :, None], iy[:, None, :]]
    gv = v[ix[:, :, None], iy[:, None, :]]
    return (gu * c).sum(axis=(1, 2)), (gv * c).sum(axis=(1, 2))


def neumaier_sum(values, total=0.0, comp=0.0):
    """Fold ``values`` into a running (total, comp) pair.

    The chunk itself is summed with ``math.fsum`` (exactly rounded), which is
    at least as accurate as the compiled Neumaier loop.
    """
    x = math.fsum(values)
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


def advect_skew(u, v, h):
    """Skew-symmetric centered advection 0.5*(U.grad U + div(U U)), periodic."""
    inv = 1.0 / (2.0 * h)

    def dx(q):
        return (np.roll(q, -1, axis=0) - np.roll(q, 1, axis=0)) * inv

    def dy(q):
        return (np.roll(q, -1, axis=1) - np.roll(q, 1, axis=1)) * inv

    Au = 0.5 * (u * dx(u) + v * dy(u) + dx(u * u) + dy(v * u))
    Av = 0.5 * (u * dx(v) + v * dy(v) + dx(u * v) + dy(v * v))
    return Au, Av


def _add(out, idx, values):
    n = out.shape[0]
    out[:, 0] += np.bincount(idx, weights=values[:, 0], minlength=n)
    out[:, 1] += np.bincount(idx, weights=values[:, 1], minlength=n)


def spring_accumulate(X, master, slave, k, rest, tension_only, out):
    """Add linear spring forces into ``out``; returns the first coincident pair index or -1."""
    if len(master) == 0:
        return -1
    d = X[slave] - X[master]
    dist = np.hypot(d[:, 0], d[:, 1])
    zero = np.flatnonzero(dist == 0.0)
    if zero.size:
        return int(zero[0])
    c = 1.0 - rest / dist
    if tension_only:
        c = np.maximum(c, 0.0)
    fm = (k * c)[:, None] * d
    _add(out, np.concatenate([master, slave]), np.concatenate([fm, -fm]))
    return -1


def beam_accumulate(X, left, mid, right, k, curv, out):
    """Add bending forces -kD, 2kD, -kD with D = X_L - 2 X_M + X_R - C."""
    if len(mid) == 0:
        return
    kD = k[:, None] * (X[left] - 2.0 * X[mid] + X[right] - curv)
    _add(out, np.concatenate([left, mid, right]), np.concatenate([-kD, 2.0 * kD, -kD]))


def target_accumulate(X, index, k, anchor, out):
    """Add penalty forces k (Y - X)."""
    if len(index) == 0:
        return
    _add(out, index, k[:, None] * (anchor - X[index]))

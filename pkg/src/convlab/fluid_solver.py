"""Periodic incompressible Navier-Stokes step, diagnostics, and VTK output.

One step of the semi-implicit scheme:

    r = (rho/dt) u - rho A(u) + F
    p = solution of  D . (r - G p) = 0
    (rho/dt)(1 + nu dt k^2) u_new = r - G p

where A is skew-symmetric centered advection, D and G are centered periodic
differences (Fourier symbol i sin(k h)/h) and k^2 is the Laplacian symbol.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _backend
from .errors import StabilityError, UsageError


@dataclass
class FluidState:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    N: int
    L: float = 8.0

    @property
    def h(self) -> float:
        return self.L / self.N

    @classmethod
    def zeros(cls, N: int, L: float = 8.0):
        z = np.zeros((N, N))
        return cls(z.copy(), z.copy(), z.copy(), N, L)

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(self.u * self.u + self.v * self.v)))

    def kinetic_energy(self) -> float:
        return float(np.sum(self.u * self.u + self.v * self.v) * self.h ** 2)


@dataclass(frozen=True)
class FluidParams:
    rho: float
    mu: float
    dt: float

    def __post_init__(self):
        if not (self.rho > 0 and self.mu > 0 and self.dt > 0):
            raise UsageError("rho, mu and dt must all be positive")

    @property
    def nu(self) -> float:
        return self.mu / self.rho


@lru_cache(maxsize=16)
def _symbols(N: int, L: float):
    # half spectrum along y, matching numpy.fft.rfft2 of real [i, j] fields
    h = L / N
    kx, ky = np.meshgrid(2.0 * np.pi * np.fft.fftfreq(N, d=h),
                         2.0 * np.pi * np.fft.rfftfreq(N, d=h), indexing="ij")
    gx = np.sin(kx * h) / h
    gy = np.sin(ky * h) / h
    g2 = gx * gx + gy * gy
    inv_g2 = np.zeros_like(g2)
    nz = g2 > 1e-12 * np.max(g2)
    inv_g2[nz] = 1.0 / g2[nz]
    k2 = kx * kx + ky * ky
    for a in (gx, gy, inv_g2, k2):
        a.setflags(write=False)
    return gx, gy, inv_g2, k2


def diffusion_factor(N: int, L: float, params: FluidParams, kx: int, ky: int) -> float:
    """Per-step amplitude factor 1/(1 + nu dt k^2) of Fourier mode (kx, ky)."""
    k2 = (2.0 * np.pi / L) ** 2 * (kx * kx + ky * ky)
    return 1.0 / (1.0 + params.nu * params.dt * k2)


def _check(state: FluidState, fx, fy):
    shape = (state.N, state.N)
    if state.u.shape != shape or state.v.shape != shape:
        raise UsageError("velocity fields do not match N")
    if np.shape(fx) != shape or np.shape(fy) != shape:
        raise UsageError("force field dimensions do not match the fluid grid")


def ns_step(state: FluidState, force, params: FluidParams, step: int | None = None) -> FluidState:
    """Advance one time step. ``force`` is a ForceField or None for zero force."""
    N, L, h = state.N, state.L, state.h
    if force is None:
        fx = fy = np.zeros((N, N))
    else:
        fx, fy = force.fx, force.fy
    _check(state, fx, fy)
    speed = state.max_speed()
    if not np.isfinite(speed):
        raise StabilityError("non-finite velocity", courant=float("inf"), step=step)
    courant = speed * params.dt / h
    if courant > 1.0:
        raise StabilityError(
            f"advective Courant number {courant:.3g} > 1 at step {step}; reduce dt",
            courant=courant, step=step)

    u = np.ascontiguousarray(state.u, dtype=np.float64)
    v = np.ascontiguousarray(state.v, dtype=np.float64)
    Au, Av = _backend.kernels.advect_skew(u, v, h)
    a = params.rho / params.dt
    r = np.stack([a * u - params.rho * np.asarray(Au) + fx,
                  a * v - params.rho * np.asarray(Av) + fy])
    ru, rv = np.fft.rfft2(r)

    gx, gy, inv_g2, k2 = _symbols(N, float(L))
    p_hat = -1j * (gx * ru + gy * rv) * inv_g2
    den = a * (1.0 + params.nu * params.dt * k2)
    vel = np.fft.irfft2(np.stack([(ru - 1j * gx * p_hat) / den,
                                  (rv - 1j * gy * p_hat) / den]), s=(N, N))
    p = np.fft.irfft2(p_hat, s=(N, N))
    return FluidState(vel[0], vel[1], p, N, L)


def _dx(q, h):
    return (np.roll(q, -1, axis=0) - np.roll(q, 1, axis=0)) / (2.0 * h)


def _dy(q, h):
    return (np.roll(q, -1, axis=1) - np.roll(q, 1, axis=1)) / (2.0 * h)


def divergence(state: FluidState) -> np.ndarray:
    return _dx(state.u, state.h) + _dy(state.v, state.h)


def vorticity(state: FluidState) -> np.ndarray:
    return _dx(state.v, state.h) - _dy(state.u, state.h)


# --- VTK (legacy ASCII) -----------------------------------------------------

def write_vtk_scalar(path, field, h: float, name: str) -> Path:
    """STRUCTURED_POINTS file holding one scalar field, x varying fastest."""
    path = Path(path)
    a = np.asarray(field, dtype=np.float64)
    nx, ny = a.shape
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write(f"{name}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} 1\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {h!r} {h!r} 1\n")
        fh.write(f"POINT_DATA {nx * ny}\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        np.savetxt(fh, a.T.reshape(-1, 1), fmt="%.17g")
    return path


def write_vtk_points(path, positions, name: str = "lagPts") -> Path:
    """POLYDATA file with one vertex cell per Lagrangian node."""
    path = Path(path)
    X = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = len(X)
    with open(path, "w") as fh:
        fh.write(f"# vtk DataFile Version 2.0\n{name}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {n} double\n")
        np.savetxt(fh, np.column_stack([X, np.zeros(n)]), fmt="%.17g")
        fh.write(f"VERTICES {n} {2 * n}\n")
        np.savetxt(fh, np.column_stack([np.ones(n, dtype=int), np.arange(n)]), fmt="%d")
    return path


def write_snapshot(directory, index: int, state: FluidState, positions=None) -> list[Path]:
    """Write uVel/vVel/P/Omega (and lagPts) for one output time."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    tag = f"{index:04d}"
    paths = [
        write_vtk_scalar(d / f"uVel.{tag}.vtk", state.u, state.h, "uVel"),
        write_vtk_scalar(d / f"vVel.{tag}.vtk", state.v, state.h, "vVel"),
        write_vtk_scalar(d / f"P.{tag}.vtk", state.p, state.h, "P"),
        write_vtk_scalar(d / f"Omega.{tag}.vtk", vorticity(state), state.h, "Omega"),
    ]
    if positions is not None:
        paths.append(write_vtk_points(d / f"lagsPts.{tag}.vtk", positions))
    return paths


def read_vtk_scalar(path) -> np.ndarray:
    """Inverse of :func:`write_vtk_scalar`; returns the [i, j] indexed field."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    dims = next(ln for ln in lines if ln.startswith("DIMENSIONS")).split()
    nx, ny = int(dims[1]), int(dims[2])
    start = next(i for i, ln in enumerate(lines) if ln.startswith("LOOKUP_TABLE")) + 1
    vals = np.array([float(x) for x in lines[start:start + nx * ny]])
    return vals.reshape(ny, nx).T

"""Immersed-boundary coupling: delta kernel, spreading, interpolation, fiber forces.

Fields are indexed ``[i, j]`` with ``i`` along x and ``j`` along y, on the
node-based periodic grid ``x_i = i h``. Lagrangian positions are stored
unwrapped; the kernels wrap them into ``[0, L)`` before stenciling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .errors import NumericError, SingularSpringError, UsageError


@dataclass(frozen=True)
class Grid:
    N: int
    L: float = 8.0

    @property
    def h(self) -> float:
        return self.L / self.N


def _ints(a):
    return np.ascontiguousarray(np.asarray(a, dtype=np.int64).reshape(-1))


def _floats(a):
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1))


@dataclass
class SpringSet:
    master: np.ndarray
    slave: np.ndarray
    k: np.ndarray
    rest: np.ndarray

    def __post_init__(self):
        self.master, self.slave = _ints(self.master), _ints(self.slave)
        self.k, self.rest = _floats(self.k), _floats(self.rest)

    @classmethod
    def empty(cls):
        return cls([], [], [], [])

    def __len__(self):
        return len(self.master)


@dataclass
class BeamSet:
    left: np.ndarray
    mid: np.ndarray
    right: np.ndarray
    k: np.ndarray
    curvature: np.ndarray  # preferred second difference, shape (m, 2)

    def __post_init__(self):
        self.left, self.mid, self.right = _ints(self.left), _ints(self.mid), _ints(self.right)
        self.k = _floats(self.k)
        self.curvature = np.ascontiguousarray(np.asarray(self.curvature, dtype=np.float64).reshape(-1, 2))

    @classmethod
    def empty(cls):
        return cls([], [], [], [], np.zeros((0, 2)))

    def __len__(self):
        return len(self.mid)


@dataclass
class TargetSet:
    index: np.ndarray
    k: np.ndarray
    anchor: np.ndarray  # shape (m, 2)

    def __post_init__(self):
        self.index, self.k = _ints(self.index), _floats(self.k)
        self.anchor = np.ascontiguousarray(np.asarray(self.anchor, dtype=np.float64).reshape(-1, 2))

    @classmethod
    def empty(cls):
        return cls([], [], np.zeros((0, 2)))

    def __len__(self):
        return len(self.index)


@dataclass
class LagrangianMesh:
    positions: np.ndarray
    ds: float | np.ndarray
    springs: SpringSet = field(default_factory=SpringSet.empty)
    beams: BeamSet = field(default_factory=BeamSet.empty)
    targets: TargetSet = field(default_factory=TargetSet.empty)
    muscles: SpringSet = field(default_factory=SpringSet.empty)

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=np.float64).reshape(-1, 2)
        self.validate()

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    def node_ds(self) -> np.ndarray:
        """Per-node spacing as a length-n array (shared, do not modify)."""
        ds = np.asarray(self.ds, dtype=np.float64)
        if ds.shape != (self.n_nodes,):
            ds = np.full(self.n_nodes, float(ds))
        return ds

    def validate(self):
        n = self.n_nodes
        if not np.all(np.isfinite(self.positions)):
            raise UsageError("node positions must be finite")
        if np.any(self.node_ds() <= 0):
            raise UsageError("ds must be positive")
        groups = {
            "spring": (self.springs, [self.springs.master, self.springs.slave]),
            "muscle": (self.muscles, [self.muscles.master, self.muscles.slave]),
            "beam": (self.beams, [self.beams.left, self.beams.mid, self.beams.right]),
            "target": (self.targets, [self.targets.index]),
        }
        for name, (rec, idx) in groups.items():
            for arr in idx:
                if arr.size and (arr.min() < 0 or arr.max() >= n):
                    raise UsageError(f"{name} index out of range for {n} nodes")
            if np.any(rec.k < 0):
                raise UsageError(f"{name} stiffness must be nonnegative")
        for name, rec in (("spring", self.springs), ("muscle", self.muscles)):
            if np.any(rec.rest < 0):
                raise UsageError(f"{name} resting length must be nonnegative")


@dataclass
class ForceField:
    fx: np.ndarray
    fy: np.ndarray
    h: float


def delta_phi(r):
    """Peskin four-point kernel phi(r), support |r| < 2."""
    return _backend.kernels.delta_phi(r)


def delta_h(dx, dy, h):
    """Two-dimensional regularized delta (1/h^2) phi(dx/h) phi(dy/h)."""
    return delta_phi(np.asarray(dx) / h) * delta_phi(np.asarray(dy) / h) / (h * h)


def spread(mesh: LagrangianMesh, node_forces, grid: Grid) -> ForceField:
    """Eulerian force density F(x_ij) = sum_s f_s delta_h(x_ij - X_s) ds."""
    f = np.asarray(node_forces, dtype=np.float64).reshape(-1, 2)
    if len(f) != mesh.n_nodes:
        raise UsageError(f"got {len(f)} node forces for {mesh.n_nodes} nodes")
    if not np.all(np.isfinite(f)):
        raise NumericError("non-finite Lagrangian force")
    X = np.ascontiguousarray(mesh.positions[:, 0])
    Y = np.ascontiguousarray(mesh.positions[:, 1])
    Fx, Fy = _backend.kernels.spread(
        X, Y, np.ascontiguousarray(f[:, 0]), np.ascontiguousarray(f[:, 1]),
        mesh.node_ds(), grid.N, grid.h,
    )
    return ForceField(Fx, Fy, grid.h)


def interp(u, v, mesh: LagrangianMesh, grid: Grid) -> np.ndarray:
    """Node velocities U(X_s) = sum_ij u_ij delta_h(x_ij - X_s) h^2, shape (n, 2)."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if u.shape != (grid.N, grid.N) or v.shape != u.shape:
        raise UsageError("velocity fields do not match the grid")
    X = np.ascontiguousarray(mesh.positions[:, 0])
    Y = np.ascontiguousarray(mesh.positions[:, 1])
    U, V = _backend.kernels.interp(u, v, X, Y, grid.h)
    return np.column_stack([U, V])


def _positions(mesh):
    return np.ascontiguousarray(mesh.positions, dtype=np.float64)


def spring_force(mesh: LagrangianMesh, springs: SpringSet | None = None,
                 tension_only: bool = False, out=None) -> np.ndarray:
    """Linear springs: master gets -k (1 - R/|X_S - X_M|)(X_M - X_S), slave the negation.

    With ``tension_only`` a spring shorter than its resting length exerts no
    force (a cable). Forces are added into ``out`` when given.
    """
    sp = mesh.springs if springs is None else springs
    if out is None:
        out = np.zeros((mesh.n_nodes, 2))
    q = _backend.kernels.spring_accumulate(_positions(mesh), sp.master, sp.slave, sp.k,
                                           sp.rest, tension_only, out)
    if q >= 0:
        pair = (int(sp.master[q]), int(sp.slave[q]))
        raise SingularSpringError(f"spring nodes {pair} coincide", pair=pair)
    return out


def muscle_force(mesh: LagrangianMesh, tension_only: bool = False, out=None) -> np.ndarray:
    return spring_force(mesh, mesh.muscles, tension_only, out)


def beam_force(mesh: LagrangianMesh, out=None) -> np.ndarray:
    """Discrete bending toward a preferred second difference.

    With D = X_L - 2 X_M + X_R - C the forces are -kD, +2kD, -kD on left,
    middle, right: the negative gradient of (k/2)|D|^2, so each beam's forces
    sum to zero.
    """
    b = mesh.beams
    if out is None:
        out = np.zeros((mesh.n_nodes, 2))
    _backend.kernels.beam_accumulate(_positions(mesh), b.left, b.mid, b.right, b.k,
                                     b.curvature, out)
    return out


def target_force(mesh: LagrangianMesh, t: float = 0.0, out=None) -> np.ndarray:
    """Penalty tether k (Y - X) toward static anchors."""
    tg = mesh.targets
    if out is None:
        out = np.zeros((mesh.n_nodes, 2))
    _backend.kernels.target_accumulate(_positions(mesh), tg.index, tg.k, tg.anchor, out)
    return out


# --- geometry files ---------------------------------------------------------
# Whitespace-delimited text with a count on line 1. Node indices are 1-based
# on disk, matching IB2d input files.

def _fmt(x):
    return f"{float(x):.17g}"


def _write(path: Path, rows):
    rows = list(rows)
    with open(path, "w") as fh:
        fh.write(f"{len(rows)}\n")
        for r in rows:
            fh.write(" ".join(r) + "\n")


def _read(path: Path, ncols: int):
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines:
        raise UsageError(f"{path}: empty geometry file")
    count = int(lines[0][0])
    body = lines[1:]
    if len(body) != count:
        raise UsageError(f"{path}: header says {count} rows, found {len(body)}")
    if any(len(r) < ncols for r in body):
        raise UsageError(f"{path}: expected {ncols} columns")
    return np.array([[float(x) for x in r[:ncols]] for r in body]).reshape(-1, ncols)


def write_geometry(mesh: LagrangianMesh, directory, name: str) -> list[Path]:
    """Write .vertex/.spring/.beam/.target (and .muscle when present)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    p = d / f"{name}.vertex"
    _write(p, ([_fmt(x), _fmt(y)] for x, y in mesh.positions))
    paths.append(p)
    for ext, sp in (("spring", mesh.springs), ("muscle", mesh.muscles)):
        if ext == "muscle" and len(sp) == 0:
            continue
        p = d / f"{name}.{ext}"
        _write(p, ([str(m + 1), str(s + 1), _fmt(k), _fmt(r)]
                   for m, s, k, r in zip(sp.master, sp.slave, sp.k, sp.rest)))
        paths.append(p)
    b = mesh.beams
    p = d / f"{name}.beam"
    _write(p, ([str(l + 1), str(m + 1), str(r + 1), _fmt(k), _fmt(c[0]), _fmt(c[1])]
               for l, m, r, k, c in zip(b.left, b.mid, b.right, b.k, b.curvature)))
    paths.append(p)
    tg = mesh.targets
    p = d / f"{name}.target"
    _write(p, ([str(i + 1), _fmt(k)] for i, k in zip(tg.index, tg.k)))
    paths.append(p)
    return paths


def read_geometry(directory, name: str, ds=None) -> LagrangianMesh:
    """Load a mesh written by :func:`write_geometry`.

    Target anchors are the vertex positions. When ``ds`` is omitted it is
    taken as the median spring resting length.
    """
    d = Path(directory)
    pos = _read(d / f"{name}.vertex", 2)

    def springs(ext):
        p = d / f"{name}.{ext}"
        if not p.exists():
            return SpringSet.empty()
        a = _read(p, 4)
        return SpringSet(a[:, 0].astype(int) - 1, a[:, 1].astype(int) - 1, a[:, 2], a[:, 3])

    sp = springs("spring")
    mu = springs("muscle")
    bp = d / f"{name}.beam"
    if bp.exists():
        a = _read(bp, 6)
        beams = BeamSet(a[:, 0].astype(int) - 1, a[:, 1].astype(int) - 1,
                        a[:, 2].astype(int) - 1, a[:, 3], a[:, 4:6])
    else:
        beams = BeamSet.empty()
    tp = d / f"{name}.target"
    if tp.exists():
        a = _read(tp, 2)
        idx = a[:, 0].astype(int) - 1
        targets = TargetSet(idx, a[:, 1], pos[idx])
    else:
        targets = TargetSet.empty()
    if ds is None:
        ds = float(np.median(sp.rest)) if len(sp) else 1.0
    return LagrangianMesh(pos, ds, sp, beams, targets, mu)

"""A jellyfish-like elastic bell driven by contracting muscles, swimming in a periodic box.

The bell is a semi-elliptical arc opening downward, mirror-symmetric about
x = L/2. Adjacent nodes are joined by springs, consecutive triples by beams
holding the rest curvature, and mirror-image node pairs by tension-only
muscle springs whose resting length oscillates. A row of target points near the
top of the box acts as a wall.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fluid_solver as fs
from .conv_harness import format_value
from .errors import GeometryError, NumericError, StabilityError, UsageError
from .ib_core import (BeamSet, Grid, LagrangianMesh, SpringSet, TargetSet, beam_force,
                      interp, muscle_force, spread, spring_force, target_force)

CONFIG_KEYS = ("N", "L", "Re", "f", "char_length", "rho", "dt", "n_cycles", "output_every",
               "k_spring_scale", "k_beam_scale", "k_target", "k_muscle",
               "contraction_fraction", "bell_a", "bell_b", "ds_factor", "output_dir")
_INT_KEYS = {"N", "n_cycles", "output_every"}

# Vertical placement of the bell margin and the wall row.
BELL_BASE_FRACTION = 0.375
WALL_FRACTION = 0.9375
# Muscles join mirror pairs on the part of the arc below this fraction of
# the bell height (1.0: every pair). They pull but never push, so the bell
# reopens passively under its own bending stiffness.
MUSCLE_BAND = 1.0
MUSCLE_TENSION_ONLY = True


@dataclass
class SimConfig:
    N: int = 64
    L: float = 8.0
    Re: float = 150.0
    f: float = 0.8
    char_length: float = 1.0
    rho: float = 1000.0
    dt: float | None = None
    n_cycles: int = 2
    output_every: int = 100
    k_spring_scale: float = 5.0e4
    k_beam_scale: float = 1.0e2
    k_target: float = 2.0e4
    k_muscle: float = 3.0e4
    contraction_fraction: float = 0.5
    bell_a: float = 0.5
    bell_b: float = 0.5
    ds_factor: float = 0.5
    output_dir: str | None = None

    def __post_init__(self):
        for k in ("L", "Re", "f", "char_length", "rho", "bell_a", "bell_b", "ds_factor"):
            if not getattr(self, k) > 0:
                raise UsageError(f"{k} must be positive")
        if self.N < 8:
            raise UsageError("N must be at least 8")
        if self.n_cycles < 1 or self.output_every < 1:
            raise UsageError("n_cycles and output_every must be >= 1")
        for k in ("k_spring_scale", "k_beam_scale", "k_target", "k_muscle"):
            if getattr(self, k) < 0:
                raise UsageError(f"{k} must be nonnegative")
        if not 0 < self.contraction_fraction <= 1:
            raise UsageError("contraction_fraction must lie in (0, 1]")
        if self.dt is not None and not self.dt > 0:
            raise UsageError("dt must be positive")
        if self.dt_effective * self.f > 1e-3 * (1 + 1e-9):
            raise UsageError("dt must give at least 1000 steps per contraction cycle")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def mu(self) -> float:
        return self.rho * self.f * self.char_length ** 2 / self.Re

    @property
    def dt_effective(self) -> float:
        if self.dt is not None:
            return self.dt
        return default_dt(self)

    @property
    def steps_per_cycle(self) -> float:
        return 1.0 / (self.f * self.dt_effective)

    @property
    def n_steps(self) -> int:
        return int(round(self.n_cycles / (self.f * self.dt_effective)))

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)


def default_dt(cfg: SimConfig) -> float:
    """0.1 h/(f c), capped so that a cycle takes at least 1000 steps."""
    return min(0.1 * cfg.h / (cfg.f * cfg.char_length), 1.0 / (1000.0 * cfg.f))


def reynolds(cfg: SimConfig | None = None, *, rho=None, length=None, velocity=None, mu=None) -> float:
    """Re = rho L V / mu with V = f L for a config, or from explicit values."""
    if cfg is not None:
        rho, length, velocity, mu = cfg.rho, cfg.char_length, cfg.f * cfg.char_length, cfg.mu
    if not all(v is not None and v > 0 for v in (rho, length, velocity, mu)):
        raise UsageError("Reynolds number needs positive rho, length, velocity, mu")
    return rho * length * velocity / mu


# --- config files -----------------------------------------------------------

def _coerce(key, raw: str):
    raw = raw.strip()
    if key == "output_dir":
        return raw or None
    if key == "dt" and raw.lower() in ("", "auto", "none"):
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None


def parse_config(text: str, **overrides) -> SimConfig:
    """Parse ``key = value`` lines. ``#`` starts a comment."""
    vals = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        vals[key] = _coerce(key, raw)
    vals.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(**vals)


def load_config(path, **overrides) -> SimConfig:
    with open(path) as fh:  # OSError propagates with the path in it
        return parse_config(fh.read(), **overrides)


def format_config(cfg: SimConfig) -> str:
    lines = []
    for k in CONFIG_KEYS:
        v = getattr(cfg, k)
        if v is None:
            v = "auto" if k == "dt" else ""
        elif isinstance(v, float):
            v = format_value(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# --- geometry ---------------------------------------------------------------

@dataclass
class BellMesh:
    mesh: LagrangianMesh
    bell_nodes: np.ndarray  # indices of bell (non-wall) nodes
    apex: int
    margin_separation: float
    muscle_rest: np.ndarray = field(repr=False)

    @property
    def n_bell(self) -> int:
        return len(self.bell_nodes)


def bell_from_mesh(mesh: LagrangianMesh) -> BellMesh:
    """Wrap a loaded mesh: untethered nodes form the bell, its highest node is the apex."""
    tethered = np.zeros(mesh.n_nodes, dtype=bool)
    tethered[mesh.targets.index] = True
    bell = np.flatnonzero(~tethered)
    if bell.size == 0:
        raise GeometryError("mesh has no untethered nodes")
    apex = int(bell[np.argmax(mesh.positions[bell, 1])])
    xb = mesh.positions[bell, 0]
    return BellMesh(mesh, bell, apex, float(xb.max() - xb.min()), mesh.muscles.rest.copy())


def _half_arc(a: float, b: float, n_half: int) -> np.ndarray:
    """Points from apex to right margin, equally spaced in arc length."""
    th = np.linspace(0.0, 0.5 * np.pi, 20001)
    x, y = a * np.sin(th), b * np.cos(th)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
    target = np.linspace(0.0, s[-1], n_half + 1)
    t = np.interp(target, s, th)
    t[0], t[-1] = 0.0, 0.5 * np.pi
    return np.column_stack([a * np.sin(t), b * np.cos(t)])


def half_arc_length(a: float, b: float) -> float:
    th = np.linspace(0.0, 0.5 * np.pi, 20001)
    return float(np.sum(np.hypot(np.diff(a * np.sin(th)), np.diff(b * np.cos(th)))))


def build_bell(cfg: SimConfig) -> BellMesh:
    """Bell nodes first (left margin, apex, right margin), then the wall row."""
    L, h = cfg.L, cfg.h
    if 2.0 * cfg.bell_a >= 0.5 * L:
        raise GeometryError(f"bell width {2 * cfg.bell_a} must be < L/2 = {0.5 * L}")
    cx, base = 0.5 * L, BELL_BASE_FRACTION * L
    wall_y = WALL_FRACTION * L
    if base + cfg.bell_b >= wall_y - 2 * h:
        raise GeometryError("bell overlaps the wall row")

    half = cfg.bell_a, cfg.bell_b
    n_half = max(2, int(round(half_arc_length(*half) / (cfg.ds_factor * h))))
    right = _half_arc(*half, n_half)
    left = right[:0:-1] * np.array([-1.0, 1.0])  # mirror, excluding the apex
    rel = np.vstack([left, right])
    bell = rel + np.array([cx, base])
    nb = len(bell)
    apex = n_half
    ds = half_arc_length(*half) / n_half

    idx = np.arange(nb - 1)
    rest = np.hypot(*(bell[idx + 1] - bell[idx]).T)
    springs = SpringSet(idx, idx + 1, np.full(nb - 1, cfg.k_spring_scale / ds), rest)

    mid = np.arange(1, nb - 1)
    curv = rel[mid - 1] - 2.0 * rel[mid] + rel[mid + 1]
    beams = BeamSet(mid - 1, mid, mid + 1, np.full(len(mid), cfg.k_beam_scale / ds ** 3), curv)

    band = rel[:, 1] <= MUSCLE_BAND * cfg.bell_b
    pairs = [(i, nb - 1 - i) for i in range(apex) if band[i]]
    m = np.array([p[0] for p in pairs], dtype=int)
    s = np.array([p[1] for p in pairs], dtype=int)
    mrest = np.hypot(*(bell[s] - bell[m]).T) if len(pairs) else np.zeros(0)
    # Per-pair stiffness scales with ds so total muscle force is resolution independent.
    muscles = SpringSet(m, s, np.full(len(pairs), cfg.k_muscle * ds), mrest)

    n_wall = int(round(L / (cfg.ds_factor * h)))
    wx = (np.arange(n_wall) + 0.5) * (L / n_wall)
    wall = np.column_stack([wx, np.full(n_wall, wall_y)])
    tidx = nb + np.arange(n_wall)
    targets = TargetSet(tidx, np.full(n_wall, cfg.k_target * ds), wall)

    pos = np.vstack([bell, wall])
    ds_nodes = np.concatenate([np.full(nb, ds), np.full(n_wall, L / n_wall)])
    mesh = LagrangianMesh(pos, ds_nodes, springs, beams, targets, muscles)
    return BellMesh(mesh, np.arange(nb), apex, float(2.0 * cfg.bell_a), mrest)


def muscle_rest_length(t: float, cfg: SimConfig, r_max: float | None = None) -> float:
    """R(t) = R_max - (R_max - R_min)(1 - cos 2 pi f t)/2 with R_min = fraction R_max."""
    if t < 0:
        raise UsageError("t must be nonnegative")
    if r_max is None:
        r_max = 2.0 * cfg.bell_a
    r_min = cfg.contraction_fraction * r_max
    act = 0.5 * (1.0 - math.cos(2.0 * math.pi * cfg.f * t))
    return r_max - (r_max - r_min) * act


def _activation_scale(t: float, cfg: SimConfig) -> float:
    return muscle_rest_length(t, cfg, 1.0)


def fiber_forces(bm: BellMesh, t: float, cfg: SimConfig) -> np.ndarray:
    """Total nodal force on every Lagrangian node at time t."""
    mesh = bm.mesh
    mesh.muscles.rest = bm.muscle_rest * _activation_scale(t, cfg)
    out = spring_force(mesh)
    beam_force(mesh, out)
    target_force(mesh, t, out)
    muscle_force(mesh, MUSCLE_TENSION_ONLY, out)
    return out


# --- simulation -------------------------------------------------------------

@dataclass
class Snapshot:
    step: int
    t: float
    u: np.ndarray
    v: np.ndarray
    positions: np.ndarray


@dataclass
class SwimRecord:
    times: np.ndarray
    bell_top_y: np.ndarray
    bell_top_x: np.ndarray
    bell_top_speed: np.ndarray
    thrust_series: np.ndarray
    snapshots: list[Snapshot]
    wall_time: float
    f: float
    ds: float
    N: int
    config: SimConfig | None = None

    def displacement(self) -> float:
        return float(self.bell_top_y[-1] - self.bell_top_y[0])

    def x_drift(self) -> float:
        return float(np.max(np.abs(self.bell_top_x - self.bell_top_x[0])))


def run_simulation(cfg: SimConfig, bell: BellMesh | None = None, write_vtk: bool = True,
                   keep_snapshots: bool = True, progress=None) -> SwimRecord:
    """Immersed-boundary time loop.

    Each step: fiber forces, spread, fluid step, interpolate, move nodes.
    The time series are recorded every step; fields are kept (and written as
    VTK when ``cfg.output_dir`` is set) every ``output_every`` steps.
    """
    bm = bell if bell is not None else build_bell(cfg)
    mesh = bm.mesh
    grid = Grid(cfg.N, cfg.L)
    dt = cfg.dt_effective
    params = fs.FluidParams(cfg.rho, cfg.mu, dt)
    state = fs.FluidState.zeros(cfg.N, cfg.L)
    nsteps = cfg.n_steps
    ds_nodes = mesh.node_ds()
    bn, apex = bm.bell_nodes, bm.apex
    bell_ds = float(ds_nodes[bn[0]])

    times = np.zeros(nsteps + 1)
    top_y = np.zeros(nsteps + 1)
    top_x = np.zeros(nsteps + 1)
    speed = np.zeros(nsteps + 1)
    thrust = np.zeros(nsteps + 1)
    snaps = []
    viz = Path(cfg.output_dir) / "viz" if (cfg.output_dir and write_vtk) else None
    io_time = 0.0

    def keep(step, t):
        nonlocal io_time
        if keep_snapshots:
            snaps.append(Snapshot(step, t, state.u.copy(), state.v.copy(), mesh.positions.copy()))
        if viz is not None:
            t_io = time.perf_counter()
            fs.write_snapshot(viz, step // cfg.output_every, state, mesh.positions)
            io_time += time.perf_counter() - t_io

    top_y[0], top_x[0] = mesh.positions[apex, 1], mesh.positions[apex, 0]
    keep(0, 0.0)
    io_time = 0.0
    t0 = time.perf_counter()
    for n in range(nsteps):
        t = n * dt
        F = fiber_forces(bm, t, cfg)
        dens = F / ds_nodes[:, None]
        thrust[n] = float(np.mean(np.abs(dens[bn, 1])))
        force = spread(mesh, dens, grid)
        try:
            state = fs.ns_step(state, force, params, step=n)
        except StabilityError as e:
            e.step = n
            raise
        U = interp(state.u, state.v, mesh, grid)
        mesh.positions += dt * U
        if not np.all(np.isfinite(mesh.positions)):
            raise NumericError(f"non-finite node position at step {n}")
        tn = (n + 1) * dt
        times[n + 1] = tn
        top_y[n + 1] = mesh.positions[apex, 1]
        top_x[n + 1] = mesh.positions[apex, 0]
        speed[n + 1] = U[apex, 1]
        if (n + 1) % cfg.output_every == 0:
            keep(n + 1, tn)
        if progress is not None:
            progress(n + 1, nsteps)
    wall = time.perf_counter() - t0 - io_time  # VTK writing is not timed
    F = fiber_forces(bm, nsteps * dt, cfg)
    thrust[nsteps] = float(np.mean(np.abs(F[bn, 1] / ds_nodes[bn])))
    return SwimRecord(times, top_y, top_x, speed, thrust, snaps, wall, cfg.f, bell_ds,
                      cfg.N, cfg)


def _last_cycles(record: SwimRecord, cycles: int):
    period = 1.0 / record.f
    t = np.asarray(record.times)
    if len(t) < 2 or t[-1] - t[0] < cycles * period * (1 - 1e-9):
        raise UsageError(f"record spans less than {cycles} contraction cycle(s)")
    return t >= t[-1] - cycles * period * (1 + 1e-9)


def swim_speed(record: SwimRecord) -> float:
    """Least-squares slope of apex height against time over the final two cycles."""
    sel = _last_cycles(record, 2)
    t = np.asarray(record.times)[sel]
    y = np.asarray(record.bell_top_y)[sel]
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


@dataclass
class ThrustError:
    times: np.ndarray
    absolute: np.ndarray
    relative: np.ndarray  # nan where the fine value is below 1e-300
    last_cycle_absolute: float
    last_cycle_relative: float | None


def thrust_error(coarse: SwimRecord, fine: SwimRecord) -> ThrustError:
    """|fbar_fine ds_fine - fbar_coarse ds_coarse| per shared sample, plus its
    last-cycle time average."""
    tc, tf = np.asarray(coarse.times), np.asarray(fine.times)
    if len(tc) != len(tf) or not np.allclose(tc, tf, rtol=0, atol=1e-9 * max(1.0, tf[-1])):
        raise UsageError("thrust records are not on the same time grid")
    a = np.asarray(fine.thrust_series) * fine.ds
    b = np.asarray(coarse.thrust_series) * coarse.ds
    absolute = np.abs(a - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(np.abs(a) < 1e-300, np.nan, absolute / np.abs(a))
    sel = _last_cycles(fine, 1)
    am, bm = float(np.mean(a[sel])), float(np.mean(b[sel]))
    la = abs(am - bm)
    lr = None if abs(am) < 1e-300 else la / abs(am)
    return ThrustError(tf, absolute, rel, la, lr)


def snapshot_at(record: SwimRecord, t: float) -> Snapshot:
    """Nearest stored snapshot within half an output interval of t."""
    if not record.snapshots:
        raise UsageError("record has no snapshots")
    ts = np.array([s.t for s in record.snapshots])
    i = int(np.argmin(np.abs(ts - t)))
    spacing = np.min(np.diff(ts)) if len(ts) > 1 else np.inf
    if abs(ts[i] - t) > 0.5 * spacing + 1e-12:
        raise UsageError(f"no snapshot within half an output interval of t={t}")
    return record.snapshots[i]


def write_outputs(record: SwimRecord, cfg: SimConfig, directory) -> list[Path]:
    """swim.csv and meta.txt (VTK files are written during the run)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    p = d / "swim.csv"
    with open(p, "w") as fh:
        fh.write("t,bell_top_y,bell_top_speed,thrust_avg\n")
        for row in zip(record.times, record.bell_top_y, record.bell_top_speed,
                       record.thrust_series):
            fh.write(",".join(format_value(x) for x in row) + "\n")
    m = d / "meta.txt"
    with open(m, "w") as fh:
        fh.write(format_config(cfg))
        fh.write(f"mu = {format_value(cfg.mu)}\n")
        fh.write(f"dt_effective = {format_value(cfg.dt_effective)}\n")
        fh.write(f"wall_time_seconds = {record.wall_time:.6f}\n")
    return [p, m]

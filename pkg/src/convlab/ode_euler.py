"""Forward Euler stepping with error and wall-time studies."""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conv_harness import ConvergenceSeries
from .errors import EvaluationError, UsageError

MAX_STEPS = 10**9
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class IvpProblem:
    rhs: Callable[[float, float], float]
    y0: float
    t0: float
    t1: float
    exact: Callable[[float], float] | None = None

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise UsageError("need t0 < t1")


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    dt: float


def paper_problem() -> IvpProblem:
    """dy/dt = 2 pi cos(2 pi t), y(0) = 1 on [0, 2].

    The exact solution of this IVP is 1 + sin(2 pi t).
    """
    return IvpProblem(
        rhs=lambda t, y: TWO_PI * math.cos(TWO_PI * t),
        y0=1.0,
        t0=0.0,
        t1=2.0,
        exact=lambda t: 1.0 + math.sin(TWO_PI * t),
    )


def _step_count(span: float, dt: float) -> tuple[int, bool]:
    ratio = span / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest), False
    return int(math.floor(ratio)), True


def _march(rhs, y0, t0, t1, dt, times, values):
    """Fill preallocated ``times``/``values``; the last step may be short."""
    n = len(times) - 1
    y = y0
    times[0] = t0
    values[0] = y0
    for k in range(n):
        t = t0 + k * dt
        tn = t1 if k == n - 1 else t0 + (k + 1) * dt
        d = rhs(t, y)
        y = y + (tn - t) * d
        times[k + 1] = tn
        values[k + 1] = y
    return y


def _allocate(p: IvpProblem, dt: float):
    if not dt > 0:
        raise UsageError("dt must be positive")
    span = p.t1 - p.t0
    if dt > span:
        raise UsageError(f"dt={dt} exceeds the time span {span}")
    n, short = _step_count(span, dt)
    n += short
    if n > MAX_STEPS:
        raise UsageError(f"{n} steps exceeds the limit of {MAX_STEPS}")
    return [0.0] * (n + 1), [0.0] * (n + 1)


def euler_solve(p: IvpProblem, dt: float) -> Trajectory:
    """Forward Euler from t0 to exactly t1."""
    times, values = _allocate(p, dt)
    _march(p.rhs, float(p.y0), p.t0, p.t1, dt, times, values)
    vals = np.asarray(values)
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise EvaluationError(f"non-finite value at t={times[k]!r}", x=times[k])
    return Trajectory(np.asarray(times), vals, dt)


def max_error(p: IvpProblem, traj: Trajectory) -> float:
    if p.exact is None:
        raise UsageError("problem has no exact solution")
    return max(abs(y - p.exact(t)) for t, y in zip(traj.times.tolist(), traj.values.tolist()))


def euler_error(p: IvpProblem, dt: float) -> float:
    """Max-norm error over all nodes of the trajectory."""
    if p.exact is None:
        raise UsageError("problem has no exact solution")
    return max_error(p, euler_solve(p, dt))


def euler_timing_study(p: IvpProblem, dt_list, repeats: int = 5) -> ConvergenceSeries:
    """Median wall time of the stepping loop only, plus max error when known.

    Output buffers are allocated outside the timed region and reused.
    """
    if len(dt_list) == 0:
        raise UsageError("dt_list is empty")
    dts = sorted((float(d) for d in dt_list), reverse=True)
    errs, times = [], []
    for dt in dts:
        tb, vb = _allocate(p, dt)
        samples = []
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            _march(p.rhs, float(p.y0), p.t0, p.t1, dt, tb, vb)
            samples.append(time.perf_counter() - t0)
        times.append(statistics.median(samples))
        traj = Trajectory(np.asarray(tb), np.asarray(vb), dt)
        errs.append(max_error(p, traj) if p.exact is not None else 0.0)
    return ConvergenceSeries(dts, errs, times, kind="dt", decreases_with="smaller")

"""Error metrics, restriction, log-log rate fits and timing capture."""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import FitError, UsageError

#: Denominators below this make a relative error undefined.
TINY_DENOMINATOR = 1e-300
DEFAULT_FLOOR = 1e-14


@dataclass
class ConvergenceSeries:
    """Ordered (resolution, error, wall time) triples for one study.

    ``kind`` names the resolution variable (``"N"``, ``"dt"``, ``"terms"``,
    ``"h"``) and ``decreases_with`` says whether error shrinks as the
    resolution value gets ``"larger"`` (N, term count) or ``"smaller"``
    (dt, h).
    """

    resolution: list
    error: list
    wall_time: list | None = None
    kind: str = "N"
    decreases_with: str = "larger"
    extra: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        self.resolution = list(self.resolution)
        self.error = [float(e) for e in self.error]
        if self.wall_time is not None:
            self.wall_time = [float(t) for t in self.wall_time]
        n = len(self.resolution)
        if len(self.error) != n or (self.wall_time is not None and len(self.wall_time) != n):
            raise ValueError("resolution, error and wall_time must have equal lengths")
        for name, col in self.extra.items():
            if len(col) != n:
                raise ValueError(f"extra column {name!r} has the wrong length")
        if self.decreases_with not in ("larger", "smaller"):
            raise ValueError("decreases_with must be 'larger' or 'smaller'")
        if any(e < 0 or math.isnan(e) for e in self.error):
            raise ValueError("errors must be nonnegative")
        diffs = np.diff(np.asarray(self.resolution, dtype=float))
        if n > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("resolutions must be strictly monotone")

    def __len__(self):
        return len(self.resolution)


@dataclass
class RateFit:
    slope: float
    intercept: float
    window: tuple[int, int]
    max_residual: float
    excluded_floor_points: int
    decreases_with: str = "larger"

    @property
    def order(self) -> float:
        """Convergence order with the sign convention folded in (2 means error ~ h^2)."""
        return -self.slope if self.decreases_with == "larger" else self.slope

    def report(self) -> str:
        return (
            f"slope={self.slope:.17g}\n"
            f"intercept={self.intercept:.17g}\n"
            f"window={self.window[0]}:{self.window[1]}\n"
            f"residual={self.max_residual:.17g}\n"
            f"floored={self.excluded_floor_points}\n"
        )


def abs_rel_error(fine_value: float, coarse_value: float):
    """Return ``(absolute, relative)``; relative is ``None`` when |fine| is ~0."""
    absolute = abs(fine_value - coarse_value)
    if abs(fine_value) < TINY_DENOMINATOR:
        return absolute, None
    return absolute, absolute / abs(fine_value)


def restrict(fine_field, ratio: int):
    """Injection onto the nested coarse grid: coarse[i, j] = fine[i*r, j*r]."""
    fine_field = np.asarray(fine_field)
    ratio = int(ratio)
    if ratio < 1 or any(n % ratio for n in fine_field.shape):
        raise UsageError(f"grid of shape {fine_field.shape} is not divisible by ratio {ratio}")
    return fine_field[::ratio, ::ratio]


def _restricted_difference(fine, coarse):
    fine = np.asarray(fine, dtype=float)
    coarse = np.asarray(coarse, dtype=float)
    if fine.ndim != 2 or coarse.ndim != 2:
        raise UsageError("fields must be two-dimensional")
    ratios = {f // c if c and f % c == 0 else None for f, c in zip(fine.shape, coarse.shape)}
    if len(ratios) != 1 or None in ratios:
        raise UsageError(f"cannot restrict {fine.shape} onto {coarse.shape}")
    fine_r = restrict(fine, ratios.pop())
    return fine_r, fine_r - coarse


def field_error(fine, coarse, p=2, h_coarse: float = 1.0, relative: bool = False):
    """Grid-norm error between a restricted fine field and a coarse field.

    For finite ``p`` this is ``(sum |d|^p h^2)^(1/p)``; ``p=inf`` gives the max
    norm. ``relative=True`` (max norm only) divides pointwise by the restricted
    fine value, skipping points whose denominator is below TINY_DENOMINATOR;
    it returns ``None`` if every point is skipped.
    """
    fine_r, diff = _restricted_difference(fine, coarse)
    adiff = np.abs(diff)
    if relative:
        if not math.isinf(p):
            raise UsageError("relative error is defined for the max norm only")
        denom = np.abs(fine_r)
        ok = denom >= TINY_DENOMINATOR
        if not ok.any():
            return None
        return float(np.max(adiff[ok] / denom[ok]))
    if math.isinf(p):
        return float(adiff.max())
    if p < 1:
        raise UsageError("p must be >= 1")
    return float((np.sum(adiff**p) * h_coarse**2) ** (1.0 / p))


def fit_rate(series: ConvergenceSeries, floor: float = DEFAULT_FLOOR) -> RateFit:
    """Least-squares line through log10(error) vs log10(resolution).

    Points at or below ``floor * max(1, max error)`` are treated as saturated
    by round-off and excluded.
    """
    res = np.asarray(series.resolution, dtype=float)
    err = np.asarray(series.error, dtype=float)
    if len(res) < 3:
        raise FitError(f"need at least 3 points to fit a rate, got {len(res)}")
    threshold = floor * max(1.0, float(err.max()) if err.size else 0.0)
    keep = np.flatnonzero(err > threshold)
    if keep.size < 3:
        raise FitError(f"only {keep.size} points lie above the floor {threshold:.3g}")
    lx = np.log10(res[keep])
    ly = np.log10(err[keep])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        window=(int(keep[0]), int(keep[-1])),
        max_residual=float(np.max(np.abs(resid))),
        excluded_floor_points=int(len(res) - keep.size),
        decreases_with=series.decreases_with,
    )


def time_scaling(factor: float, dimension: int) -> float:
    """Estimated cost growth when refining a ``dimension``-D grid by ``factor``."""
    if factor < 1 or dimension < 1:
        raise UsageError("factor must be >= 1 and dimension >= 1")
    return float(factor) ** int(dimension)


def timed(fn: Callable[..., Any], *args, repeats: int = 1, **kwargs):
    """Run ``fn`` and return ``(result, seconds)`` from a monotonic clock.

    With ``repeats > 1`` the median time is reported and the last result kept.
    """
    times = []
    result = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        times.append(time.perf_counter() - t0)
    return result, statistics.median(times)


def format_value(x) -> str:
    if x is None:
        return "undefined"
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows) -> Path:
    """Single-header CSV with 17-significant-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(x) for x in row])
    return path


def write_study_csv(series: ConvergenceSeries, path) -> Path:
    times = series.wall_time or [None] * len(series)
    return write_csv(
        path,
        ["resolution", "error", "wall_time_seconds"],
        zip(series.resolution, series.error, times),
    )


def read_study_csv(path, kind="N", decreases_with="larger") -> ConvergenceSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    res = [float(r["resolution"]) for r in rows]
    err = [float(r["error"]) for r in rows]
    wt = [r.get("wall_time_seconds") for r in rows]
    wall = None if any(t in (None, "", "undefined") for t in wt) else [float(t) for t in wt]
    return ConvergenceSeries(res, err, wall, kind=kind, decreases_with=decreases_with)

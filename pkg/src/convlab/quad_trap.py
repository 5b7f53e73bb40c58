"""Composite trapezoid rule, its error bound, and convergence studies."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import _backend
from .conv_harness import ConvergenceSeries
from .errors import EvaluationError, UsageError

CHUNK = 1 << 20
REFERENCE_N = 10_000_000
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Integrand:
    """A vectorized real function plus metadata.

    ``eval`` must accept numpy arrays.
    """

    eval: Callable
    label: str
    second_derivative: Callable | None = None
    is_periodic_on_domain: bool = False

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class QuadStudy:
    a: float
    b: float
    n_list: tuple[int, ...]
    reference_value: float
    reference_n: int = REFERENCE_N

    def __post_init__(self):
        if any(n < 1 or n >= self.reference_n for n in self.n_list):
            raise UsageError("every n must satisfy 1 <= n < reference_n")


def _nonperiodic(x):
    s = np.sin(TWO_PI * x)
    c = np.cos(TWO_PI * x)
    return (x * x + 3.0) * c * c / (1.0 + np.exp(s)) ** 2


def _periodic(x):
    s = np.sin(TWO_PI * x)
    c = np.cos(TWO_PI * x)
    return c * c / (1.0 + np.exp(s)) ** 2


EXAMPLE_NONPERIODIC = Integrand(_nonperiodic, "example_nonperiodic")
EXAMPLE_PERIODIC = Integrand(_periodic, "example_periodic", is_periodic_on_domain=True)
LINEAR = Integrand(lambda x: 2.0 * np.asarray(x, dtype=float), "linear_2x",
                   second_derivative=lambda x: np.zeros_like(np.asarray(x, dtype=float)))

BUILTIN = {
    "nonperiodic": EXAMPLE_NONPERIODIC,
    "periodic": EXAMPLE_PERIODIC,
    "linear": LINEAR,
}


def _check_finite(vals, x):
    bad = ~np.isfinite(vals)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"integrand is not finite at x={x[j]!r}", x=float(x[j]))


def trap_composite(f, a: float, b: float, n: int) -> float:
    """Composite trapezoid rule with ``n`` uniform subintervals.

    Node values are accumulated with compensated summation in chunks so that
    n = 10**7 neither loses digits nor allocates the whole grid at once.
    """
    n = int(n)
    if n < 1:
        raise UsageError("n must be >= 1")
    if not a < b:
        raise UsageError("need a < b")
    k = _backend.kernels
    width = b - a
    total, comp = 0.0, 0.0
    for start in range(0, n + 1, CHUNK):
        j = np.arange(start, min(start + CHUNK, n + 1), dtype=np.float64)
        x = a + width * j / n
        vals = np.asarray(f(x), dtype=np.float64)
        if vals.shape != x.shape:
            vals = np.broadcast_to(vals, x.shape).astype(np.float64)
        _check_finite(vals, x)
        if start == 0:
            vals = vals.copy()
            vals[0] *= 0.5
        if start + len(j) == n + 1:
            if vals.base is not None and not vals.flags.writeable:
                vals = vals.copy()
            vals[-1] *= 0.5
        total, comp = k.neumaier_sum(np.ascontiguousarray(vals), total, comp)
    return (total + comp) * width / n


def trap_error_bound(k_max: float, a: float, b: float, n: int) -> float:
    """K (b-a)^3 / (12 N^2)."""
    if k_max < 0 or n < 1:
        raise UsageError("need k_max >= 0 and n >= 1")
    return k_max * (b - a) ** 3 / (12.0 * n * n)


def estimate_k(f, a: float, b: float, samples: int = 100_001) -> float:
    """max |f''| on [a, b].

    Uses ``f.second_derivative`` when available. Otherwise a central
    difference with step 1e-5 (b-a) is sampled on a uniform grid, which is an
    approximation of the true maximum.
    """
    if not a < b:
        raise UsageError("need a < b")
    x = np.linspace(a, b, samples)
    d2 = getattr(f, "second_derivative", None)
    if d2 is not None:
        vals = np.asarray(d2(x), dtype=float)
    else:
        step = 1e-5 * (b - a)
        vals = (f(x + step) - 2.0 * f(x) + f(x - step)) / (step * step)
    _check_finite(vals, x)
    return float(np.max(np.abs(vals)))


def _cache_dir(cache_dir=None) -> Path:
    if cache_dir is not None:
        return Path(cache_dir)
    env = os.environ.get("CONVLAB_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "convlab"


def reference_value(f: Integrand, a: float, b: float, n: int = REFERENCE_N, cache_dir=None,
                    use_cache: bool = True) -> float:
    """Surrogate-truth integral at large ``n``, cached on disk by integrand label."""
    path = _cache_dir(cache_dir) / f"trap_ref_{f.label}_{a!r}_{b!r}_{n}.json"
    if use_cache and path.exists():
        try:
            return float(json.loads(path.read_text())["value"])
        except (ValueError, KeyError):
            pass  # corrupt cache entry; recompute
    value = trap_composite(f, a, b, n)
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps({"label": f.label, "a": a, "b": b, "n": n,
                                        "value": repr(value)}))
        except OSError:
            pass
    return value


def make_study(f: Integrand, a: float, b: float, n_list, reference_n: int = REFERENCE_N,
               cache_dir=None, reference: float | None = None) -> QuadStudy:
    if reference is None:
        reference = reference_value(f, a, b, reference_n, cache_dir=cache_dir)
    return QuadStudy(a, b, tuple(sorted(set(int(n) for n in n_list))), reference, reference_n)


def trap_study(study: QuadStudy, f: Integrand) -> ConvergenceSeries:
    """Error and wall time of the trapezoid rule at each N of the study."""
    approx, errs, times = [], [], []
    for n in study.n_list:
        t0 = time.perf_counter()
        val = trap_composite(f, study.a, study.b, n)
        times.append(time.perf_counter() - t0)
        approx.append(val)
        errs.append(abs(val - study.reference_value))
    parity = ["even" if n % 2 == 0 else "odd" for n in study.n_list]
    return ConvergenceSeries(
        list(study.n_list), errs, times, kind="N", decreases_with="larger",
        extra={"approximation": approx, "parity": parity},
    )


def log_spaced(lo: int, hi: int, per_decade: int = 8) -> list[int]:
    """Distinct integers log-spaced between ``lo`` and ``hi`` inclusive."""
    pts = np.logspace(np.log10(lo), np.log10(hi),
                      int(round(per_decade * np.log10(hi / lo))) + 1)
    return sorted(set(int(round(p)) for p in pts))

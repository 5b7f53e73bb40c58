"""Fibonacci ratios converging to the golden ratio."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import IndexRangeError

#: The golden ratio as a 64-bit float, used as the "exact" value.
PHI_HAT = 1.618033988749895
MACHINE_FLOOR = 1.0e-16
MAX_INDEX = 91


@dataclass(frozen=True)
class FibTable:
    values: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class GoldenSeries:
    n_values: tuple[int, ...]
    approximations: tuple[float, ...]
    errors: tuple[float, ...]


def fib_sequence(n: int) -> FibTable:
    """F_0..F_n with F_0 = F_1 = 1, in exact integer arithmetic."""
    if n < 0 or n > MAX_INDEX:
        raise IndexRangeError(f"Fibonacci index {n} outside [0, {MAX_INDEX}]")
    vals = [1, 1]
    while len(vals) <= n:
        vals.append(vals[-1] + vals[-2])
    return FibTable(tuple(vals[: n + 1]))


def golden_series(n_max: int) -> GoldenSeries:
    """phi_k = F_{k+1}/F_k and its absolute error for k = 1..n_max."""
    if n_max < 1 or n_max > MAX_INDEX - 1:
        raise IndexRangeError(f"n_max {n_max} outside [1, {MAX_INDEX - 1}]")
    F = fib_sequence(n_max + 1).values
    ks = tuple(range(1, n_max + 1))
    approx = tuple(F[k + 1] / F[k] for k in ks)  # int/int division is correctly rounded
    errs = tuple(abs(PHI_HAT - a) for a in approx)
    return GoldenSeries(ks, approx, errs)


def terms_for_tolerance(tol: float) -> int:
    """Smallest k with E_k <= tol; tolerances under 1e-16 are clamped to it."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    tol = max(tol, MACHINE_FLOOR)
    s = golden_series(MAX_INDEX - 1)
    for k, e in zip(s.n_values, s.errors):
        if e <= tol:
            return k
    raise IndexRangeError(f"tolerance {tol} not reached within {MAX_INDEX - 1} terms")


def geometric_bound(m: int) -> float:
    """Upper bound 1/F_{m-1} on E_m."""
    if m < 2 or m > MAX_INDEX:
        raise IndexRangeError(f"index {m} outside [2, {MAX_INDEX}]")
    return 1.0 / fib_sequence(m - 1).values[-1]

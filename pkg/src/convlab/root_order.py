"""Secant and Newton iterations with empirical order estimation."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

from .errors import EvaluationError, FitError, StagnationError, UsageError

ERROR_FLOOR = 1e-13
ERROR_CAP = 0.5


@dataclass
class RootRun:
    iterates: list[float]
    residuals: list[float]
    converged: bool
    root_estimate: float
    tol: float = 0.0
    method: str = ""


def _value(f, x):
    fx = float(f(x))
    if not math.isfinite(fx):
        raise EvaluationError(f"function is not finite at x={x!r}", x=x)
    return fx


def secant(f, x0: float, x1: float, tol: float = 1e-14, max_iter: int = 100) -> RootRun:
    """Secant iteration, stopping once |f(x)| <= tol."""
    if x0 == x1:
        raise UsageError("secant needs two distinct starting points")
    f0, f1 = _value(f, x0), _value(f, x1)
    xs, rs = [x0, x1], [abs(f0), abs(f1)]
    converged = abs(f1) <= tol
    it = 0
    while not converged and it < max_iter:
        if f1 == f0:
            raise StagnationError(f"f({x0!r}) == f({x1!r}); secant stagnated", points=(x0, x1))
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not math.isfinite(x2):
            raise EvaluationError(f"non-finite iterate from ({x0!r}, {x1!r})", x=x2)
        f2 = _value(f, x2)
        xs.append(x2)
        rs.append(abs(f2))
        x0, f0, x1, f1 = x1, f1, x2, f2
        it += 1
        converged = abs(f1) <= tol
    return RootRun(xs, rs, converged, xs[-1], tol, "secant")


def newton(f, fprime, x0: float, tol: float = 1e-14, max_iter: int = 100) -> RootRun:
    """Newton iteration with the same residual stopping rule as :func:`secant`."""
    fx = _value(f, x0)
    xs, rs = [x0], [abs(fx)]
    x = x0
    it = 0
    converged = abs(fx) <= tol
    while not converged and it < max_iter:
        d = _value(fprime, x)
        if d == 0.0:
            raise StagnationError(f"zero derivative at x={x!r}", points=(x,))
        x = x - fx / d
        fx = _value(f, x)
        xs.append(x)
        rs.append(abs(fx))
        it += 1
        converged = abs(fx) <= tol
    return RootRun(xs, rs, converged, x, tol, "newton")


def empirical_order(run: RootRun, true_root: float) -> float:
    """Median of log(e_{n+1}/e_n) / log(e_n/e_{n-1}) over pre-floor triples.

    A triple is admissible only if all three errors lie in [1e-13, 0.5].
    """
    errs = [abs(x - true_root) for x in run.iterates]
    if sum(e > ERROR_FLOOR for e in errs) < 5:
        raise FitError("need at least 5 iterates with errors above the 1e-13 floor")
    ok = [ERROR_FLOOR <= e <= ERROR_CAP for e in errs]
    estimates = []
    for n in range(1, len(errs) - 1):
        if ok[n - 1] and ok[n] and ok[n + 1]:
            den = math.log(errs[n] / errs[n - 1])
            if den != 0.0:
                estimates.append(math.log(errs[n + 1] / errs[n]) / den)
    if not estimates:
        raise FitError("no admissible error triples")
    return statistics.median(estimates)


@dataclass(frozen=True)
class RootProblem:
    label: str
    f: object
    fprime: object
    root: float
    secant_start: tuple[float, float]
    newton_start: float


# Starting points leave at least five pre-floor iterates for order estimation.
ROOT_PROBLEMS = {
    "x2-2": RootProblem("x^2-2", lambda x: x * x - 2.0, lambda x: 2.0 * x,
                         math.sqrt(2.0), (1.0, 2.0), 2.0),
    "cosx-x": RootProblem("cos(x)-x", lambda x: math.cos(x) - x, lambda x: -math.sin(x) - 1.0,
                           0.7390851332151607, (0.0, 0.5), -1.0),
    "expx-2": RootProblem("exp(x)-2", lambda x: math.exp(x) - 2.0, math.exp,
                           math.log(2.0), (0.0, 0.5), 2.0),
}

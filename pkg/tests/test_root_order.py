import math

import pytest
from hypothesis import given, strategies as st

from convlab.errors import EvaluationError, FitError, StagnationError, UsageError
from convlab.root_order import ROOT_PROBLEMS, RootRun, empirical_order, newton, secant

GOLDEN = (1 + math.sqrt(5)) / 2


def test_secant_finds_sqrt2():
    run = secant(lambda x: x * x - 2.0, 1.0, 2.0)
    assert run.converged
    assert run.root_estimate == pytest.approx(math.sqrt(2.0), abs=1e-15)
    assert run.method == "secant"


def test_first_secant_iterate_by_hand():
    # chord through (1, -1) and (2, 2) crosses zero at 4/3
    run = secant(lambda x: x * x - 2.0, 1.0, 2.0, max_iter=1)
    assert run.iterates[2] == pytest.approx(4.0 / 3.0, abs=1e-15)


@pytest.mark.parametrize("name", sorted(ROOT_PROBLEMS))
def test_orders(name):
    p = ROOT_PROBLEMS[name]
    s = empirical_order(secant(p.f, *p.secant_start), p.root)
    n = empirical_order(newton(p.f, p.fprime, p.newton_start), p.root)
    assert abs(s - GOLDEN) < 0.1
    assert abs(n - 2.0) < 0.15


def test_roots_are_roots():
    for p in ROOT_PROBLEMS.values():
        assert abs(p.f(p.root)) < 1e-15


@given(st.floats(min_value=1.05, max_value=3.0))
def test_newton_converges_for_sqrt2_from_right(x0):
    run = newton(lambda x: x * x - 2.0, lambda x: 2.0 * x, x0)
    assert run.converged
    assert abs(run.root_estimate - math.sqrt(2.0)) < 1e-14


def test_secant_errors():
    with pytest.raises(UsageError):
        secant(lambda x: x, 1.0, 1.0)
    with pytest.raises(StagnationError):
        secant(lambda x: 1.0, 0.0, 1.0)
    with pytest.raises(EvaluationError):
        secant(lambda x: math.inf, 0.0, 1.0)


def test_newton_zero_derivative():
    with pytest.raises(StagnationError):
        newton(lambda x: x * x + 1.0, lambda x: 2.0 * x, 0.0)


def test_iteration_cap():
    run = secant(lambda x: x * x + 1.0, 0.0, 0.5, max_iter=5)
    assert not run.converged
    assert len(run.iterates) == 7


def test_order_needs_enough_iterates():
    run = RootRun([1.5, 1.42, 1.4143], [0.2, 0.01, 1e-4], True, 1.4143)
    with pytest.raises(FitError):
        empirical_order(run, math.sqrt(2.0))


def test_order_of_exact_sequence():
    # e_{n+1} = e_n^2 exactly gives order 2
    errs = [0.5 ** (2**k) for k in range(1, 6)]
    run = RootRun([1.0 + e for e in errs], errs, True, 1.0)
    assert empirical_order(run, 1.0) == pytest.approx(2.0, abs=1e-12)

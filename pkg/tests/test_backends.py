import os
import subprocess
import sys

import numpy as np
import pytest

from convlab import _backend

needs_both = pytest.mark.skipif(len(_backend.BACKENDS) < 2, reason="compiled core not built")


def selected_backend(env_extra):
    env = dict(os.environ)
    env.pop("CONVLAB_PURE_PYTHON", None)
    env.update(env_extra)
    res = subprocess.run([sys.executable, "-c", "import convlab; print(convlab.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    return res.stdout.strip()


def test_environment_forces_pure_python():
    assert selected_backend({"CONVLAB_PURE_PYTHON": "1"}) == "python"


@needs_both
def test_compiled_is_the_default():
    assert selected_backend({}) == "compiled"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


@pytest.fixture
def pair():
    if len(_backend.BACKENDS) < 2:
        pytest.skip("compiled core not built")
    return _backend.get("python"), _backend.get("compiled")


def test_advection_agrees(pair, rng):
    py, cc = pair
    u, v = rng.standard_normal((24, 24)), rng.standard_normal((24, 24))
    for a, b in zip(py.advect_skew(u, v, 0.3), cc.advect_skew(u, v, 0.3)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_compensated_sum_agrees(pair, rng):
    py, cc = pair
    x = rng.standard_normal(10_000) * 10.0 ** rng.integers(-8, 8, 10_000)
    assert sum(py.neumaier_sum(x)) == pytest.approx(sum(cc.neumaier_sum(x)), rel=1e-15)
    assert sum(cc.neumaier_sum(np.array([1.0, 1e100, 1.0, -1e100]))) == 2.0


def test_fiber_kernels_agree(pair, rng):
    py, cc = pair
    n = 30
    X = rng.uniform(0, 8, (n, 2))
    m = np.arange(n - 1, dtype=np.int64)
    k, rest = rng.uniform(0, 5, n - 1), rng.uniform(0, 2, n - 1)
    for tension_only in (False, True):
        a, b = np.zeros((n, 2)), np.zeros((n, 2))
        assert py.spring_accumulate(X, m, m + 1, k, rest, tension_only, a) == -1
        assert cc.spring_accumulate(X, m, m + 1, k, rest, tension_only, b) == -1
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    mid = np.arange(1, n - 1, dtype=np.int64)
    kb, curv = rng.uniform(0, 5, n - 2), rng.standard_normal((n - 2, 2))
    a, b = np.zeros((n, 2)), np.zeros((n, 2))
    py.beam_accumulate(X, mid - 1, mid, mid + 1, kb, curv, a)
    cc.beam_accumulate(X, mid - 1, mid, mid + 1, kb, curv, b)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    idx = np.array([0, 7, 29], dtype=np.int64)
    kt, anchor = rng.uniform(0, 5, 3), rng.uniform(0, 8, (3, 2))
    a, b = np.zeros((n, 2)), np.zeros((n, 2))
    py.target_accumulate(X, idx, kt, anchor, a)
    cc.target_accumulate(X, idx, kt, anchor, b)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_coincident_spring_reported_by_both(pair):
    X = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    m, s = np.array([0, 1], dtype=np.int64), np.array([1, 2], dtype=np.int64)
    for kern in pair:
        out = np.zeros((3, 2))
        assert kern.spring_accumulate(X, m, s, np.ones(2), np.zeros(2), False, out) == 1


@needs_both
def test_short_swim_matches_across_backends(tmp_path):
    code = ("from convlab.jelly_model import SimConfig, run_simulation;"
            "r = run_simulation(SimConfig(N=16, n_cycles=1), write_vtk=False);"
            "print(repr(float(r.bell_top_y[-1])))")
    out = {}
    for flag in ("", "1"):
        env = dict(os.environ)
        env.pop("CONVLAB_PURE_PYTHON", None)
        if flag:
            env["CONVLAB_PURE_PYTHON"] = flag
        res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                             env=env, check=True)
        out[flag] = float(res.stdout)
    assert out[""] == pytest.approx(out["1"], abs=1e-10)

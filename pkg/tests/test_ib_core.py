import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convlab import _backend
from convlab.errors import NumericError, SingularSpringError, UsageError
from convlab.ib_core import (BeamSet, Grid, LagrangianMesh, SpringSet, TargetSet, beam_force,
                             delta_h, delta_phi, interp, read_geometry, spread, spring_force,
                             target_force, write_geometry)

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True)


def mesh_at(points, ds=0.05, **kw):
    return LagrangianMesh(np.asarray(points, dtype=float), ds, **kw)


def test_kernel_values():
    assert delta_phi(0.0) == 0.5
    assert delta_phi(1.0) == pytest.approx(0.25, abs=1e-15)
    assert delta_phi(2.0) == 0.0
    assert delta_phi(-3.7) == 0.0


def test_kernel_continuous_at_one():
    eps = 1e-9
    assert delta_phi(1 - eps) == pytest.approx(delta_phi(1 + eps), abs=1e-8)


def test_kernel_accepts_arrays():
    r = np.linspace(-2.5, 2.5, 11).reshape(11, 1)
    out = delta_phi(r)
    assert out.shape == r.shape
    assert np.array_equal(out.ravel(), delta_phi(-r).ravel())


def test_delta_h_normalization():
    h = 0.25
    assert delta_h(0.0, 0.0, h) == pytest.approx(0.25 / h**2)


@settings(max_examples=1000)
@given(unit)
def test_partition_of_unity_and_first_moment(r):
    j = np.arange(-2, 3)
    w = delta_phi(r - j)
    assert abs(w.sum() - 1.0) < 1e-12
    assert abs(np.sum((r - j) * w)) < 1e-12


def test_spread_zero_force():
    g = Grid(16)
    m = mesh_at([[1.3, 2.7], [4.0, 4.0]])
    F = spread(m, np.zeros((2, 2)), g)
    assert not F.fx.any() and not F.fy.any()


@given(st.floats(min_value=-20, max_value=20), st.floats(min_value=-20, max_value=20))
def test_single_node_force_is_conserved(x, y):
    g = Grid(16)
    m = mesh_at([[x, y]], ds=0.07)
    F = spread(m, [[1.0, 0.0]], g)
    assert F.fx.sum() * g.h**2 == pytest.approx(0.07, rel=1e-12)
    assert F.fy.sum() == 0.0


def test_node_on_grid_point():
    g = Grid(16)
    ds = 0.1
    m = mesh_at([[3 * g.h, 5 * g.h]], ds=ds)
    F = spread(m, [[1.0, 0.0]], g)
    assert F.fx[3, 5] == pytest.approx(0.25 * ds / g.h**2, rel=1e-14)
    assert np.count_nonzero(F.fx) == 9  # phi(+-2) = 0, so the corners drop out


def test_stencil_touches_at_most_sixteen_points():
    g = Grid(16)
    m = mesh_at([[1.234, 5.678]])
    F = spread(m, [[1.0, 1.0]], g)
    assert np.count_nonzero(F.fx) <= 16


def test_periodic_wrap():
    g = Grid(16)
    a = spread(mesh_at([[0.1, 7.95]]), [[1.0, -2.0]], g)
    b = spread(mesh_at([[8.1, -0.05]]), [[1.0, -2.0]], g)
    np.testing.assert_allclose(a.fx, b.fx, atol=1e-13)
    np.testing.assert_allclose(a.fy, b.fy, atol=1e-13)


def test_non_finite_force_rejected():
    with pytest.raises(NumericError):
        spread(mesh_at([[1.0, 1.0]]), [[np.nan, 0.0]], Grid(8))


def test_interp_uniform_and_zero(rng):
    g = Grid(32)
    m = mesh_at(rng.uniform(-1, 9, (50, 2)))
    U = interp(np.full((32, 32), 2.5), np.full((32, 32), -1.0), m, g)
    np.testing.assert_allclose(U[:, 0], 2.5, rtol=1e-13)
    np.testing.assert_allclose(U[:, 1], -1.0, rtol=1e-13)
    assert not interp(np.zeros((32, 32)), np.zeros((32, 32)), m, g).any()


@pytest.mark.parametrize("seed", range(100))
def test_spread_interp_adjoint(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.choice([8, 16, 32]))
    g = Grid(N)
    n = int(rng.integers(1, 40))
    ds = rng.uniform(0.01, 0.2, n)
    m = LagrangianMesh(rng.uniform(0, 8, (n, 2)), ds)
    f = rng.standard_normal((n, 2))
    u, v = rng.standard_normal((N, N)), rng.standard_normal((N, N))
    F = spread(m, f, g)
    lhs = np.sum(F.fx * u + F.fy * v) * g.h**2
    U = interp(u, v, m, g)
    rhs = np.sum((f[:, 0] * U[:, 0] + f[:, 1] * U[:, 1]) * ds)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-13)
    total = f.T @ ds
    assert F.fx.sum() * g.h**2 == pytest.approx(total[0], rel=1e-12, abs=1e-13)
    assert F.fy.sum() * g.h**2 == pytest.approx(total[1], rel=1e-12, abs=1e-13)


def springs(m, s, k, rest):
    return SpringSet([m], [s], [k], [rest])


def test_spring_at_rest_is_silent():
    mesh = mesh_at([[0, 0], [0.6, 0.8]], springs=springs(0, 1, 7.0, 1.0))
    np.testing.assert_allclose(spring_force(mesh), 0.0, atol=1e-15)


def test_spring_hand_value():
    mesh = mesh_at([[0, 0], [1, 0]], springs=springs(0, 1, 1.0, 0.0))
    f = spring_force(mesh)
    np.testing.assert_array_equal(f, [[1.0, 0.0], [-1.0, 0.0]])


def test_stretched_spring_pulls_master_toward_slave():
    mesh = mesh_at([[1, 1], [2, 3]], springs=springs(0, 1, 3.0, 0.5))
    f = spring_force(mesh)
    d = np.array([1.0, 2.0])
    assert f[0] @ d > 0
    assert abs(f[0, 0] * d[1] - f[0, 1] * d[0]) < 1e-14


def test_compressed_cable_is_slack():
    mesh = mesh_at([[0, 0], [0.5, 0]], springs=springs(0, 1, 3.0, 1.0))
    assert spring_force(mesh, tension_only=False)[0, 0] < 0
    assert not spring_force(mesh, tension_only=True).any()


def test_singular_spring_names_pair():
    mesh = mesh_at([[0, 0], [1, 1], [1, 1]],
                   springs=SpringSet([0, 1], [1, 2], [1.0, 1.0], [0.1, 0.1]))
    with pytest.raises(SingularSpringError) as exc:
        spring_force(mesh)
    assert exc.value.pair == (1, 2)


def test_beam_zero_cases():
    straight = mesh_at([[0, 0], [1, 0], [2, 0]], beams=BeamSet([0], [1], [2], [5.0], [[0, 0]]))
    assert not beam_force(straight).any()
    bent = np.array([[0, 0], [1, 0.4], [2, 0.1]])
    curv = bent[0] - 2 * bent[1] + bent[2]
    mesh = mesh_at(bent, beams=BeamSet([0], [1], [2], [5.0], [curv]))
    np.testing.assert_allclose(beam_force(mesh), 0.0, atol=1e-14)


def test_beam_restores_perturbed_middle():
    mesh = mesh_at([[0, 0], [1, 0.1], [2, 0]], beams=BeamSet([0], [1], [2], [5.0], [[0, 0]]))
    f = beam_force(mesh)
    assert f[1, 1] < 0
    np.testing.assert_allclose(f.sum(axis=0), 0.0, atol=1e-14)


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_fiber_forces_conserve_momentum(seed):
    rng = np.random.default_rng(seed)
    n = 12
    X = rng.uniform(0, 8, (n, 2))
    m = np.arange(n - 1)
    sp = SpringSet(m, m + 1, rng.uniform(0, 10, n - 1), rng.uniform(0, 1, n - 1))
    mid = np.arange(1, n - 1)
    bm = BeamSet(mid - 1, mid, mid + 1, rng.uniform(0, 10, n - 2), rng.standard_normal((n - 2, 2)))
    mesh = LagrangianMesh(X, 0.1, springs=sp, beams=bm)
    for f in (spring_force(mesh), beam_force(mesh)):
        assert np.all(np.abs(f.sum(axis=0)) <= 1e-12 * max(1.0, np.abs(f).max()))
    # with zero preferred curvature the beams also exert no net torque
    flat = LagrangianMesh(X, 0.1, beams=BeamSet(bm.left, bm.mid, bm.right, bm.k, np.zeros((n - 2, 2))))
    fb = beam_force(flat)
    torque = np.sum(X[:, 0] * fb[:, 1] - X[:, 1] * fb[:, 0])
    assert abs(torque) < 1e-9 * max(1.0, np.abs(fb).max())


def test_target_force_cases():
    tg = TargetSet([0], [2.0], [[1.5, 1.0]])
    assert not target_force(mesh_at([[1.5, 1.0]], targets=tg)).any()
    np.testing.assert_array_equal(target_force(mesh_at([[1.0, 1.0]], targets=tg)), [[1.0, 0.0]])
    f1 = target_force(mesh_at([[1.3, 1.0]], targets=tg))
    f2 = target_force(mesh_at([[1.1, 1.0]], targets=tg))
    assert f2[0, 0] / f1[0, 0] == pytest.approx(2.0)


def test_forces_accumulate_into_out():
    tg = TargetSet([0], [2.0], [[1.5, 1.0]])
    mesh = mesh_at([[1.0, 1.0], [2.0, 1.0]], targets=tg, springs=springs(0, 1, 1.0, 0.0))
    out = np.zeros((2, 2))
    spring_force(mesh, out=out)
    target_force(mesh, out=out)
    np.testing.assert_allclose(out, spring_force(mesh) + target_force(mesh))


def test_mesh_validation():
    with pytest.raises(UsageError):
        mesh_at([[0, 0]], springs=springs(0, 3, 1.0, 0.0))
    with pytest.raises(UsageError):
        mesh_at([[0, 0], [1, 0]], springs=springs(0, 1, -1.0, 0.0))
    with pytest.raises(UsageError):
        mesh_at([[0, np.inf]])


def test_geometry_roundtrip(tmp_path, rng):
    n = 6
    X = rng.uniform(0, 8, (n, 2))
    m = np.arange(n - 1)
    mesh = LagrangianMesh(
        X, 0.125,
        springs=SpringSet(m, m + 1, np.full(n - 1, 3.0), np.full(n - 1, 0.125)),
        beams=BeamSet([0, 1], [1, 2], [2, 3], [4.0, 4.0], rng.standard_normal((2, 2))),
        targets=TargetSet([0, 5], [9.0, 9.0], X[[0, 5]]),
        muscles=SpringSet([0], [5], [2.0], [1.0]),
    )
    paths = write_geometry(mesh, tmp_path, "shape")
    assert sorted(p.suffix for p in paths) == [".beam", ".muscle", ".spring", ".target", ".vertex"]
    lines = (tmp_path / "shape.spring").read_text().splitlines()
    assert lines[0] == "5" and lines[1].split()[:2] == ["1", "2"]
    back = read_geometry(tmp_path, "shape")
    np.testing.assert_array_equal(back.positions, X)
    assert back.ds == 0.125
    for a, b in ((back.springs, mesh.springs), (back.muscles, mesh.muscles)):
        for field in ("master", "slave", "k", "rest"):
            np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
    np.testing.assert_array_equal(back.beams.curvature, mesh.beams.curvature)
    np.testing.assert_array_equal(back.targets.anchor, mesh.targets.anchor)


def test_geometry_count_mismatch(tmp_path):
    (tmp_path / "bad.vertex").write_text("3\n0 0\n1 1\n")
    with pytest.raises(UsageError):
        read_geometry(tmp_path, "bad")


needs_both = pytest.mark.skipif(len(_backend.BACKENDS) < 2, reason="compiled core not built")


@needs_both
def test_backends_agree_on_coupling(rng):
    py, cc = _backend.get("python"), _backend.get("compiled")
    n, N = 60, 32
    h = 8.0 / N
    X, Y = rng.uniform(-2, 10, n), rng.uniform(-2, 10, n)
    fx, fy, w = rng.standard_normal(n), rng.standard_normal(n), rng.uniform(0.05, 0.1, n)
    for a, b in zip(py.spread(X, Y, fx, fy, w, N, h), cc.spread(X, Y, fx, fy, w, N, h)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    u, v = rng.standard_normal((N, N)), rng.standard_normal((N, N))
    for a, b in zip(py.interp(u, v, X, Y, h), cc.interp(u, v, X, Y, h)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    r = np.linspace(-3, 3, 1001)
    np.testing.assert_allclose(py.delta_phi(r), cc.delta_phi(r), atol=1e-15)

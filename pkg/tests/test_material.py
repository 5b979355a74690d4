import numpy as np
import pytest
import sympy as sy

from nemflow.grid import BoundaryData, Grid, apply_bc, gradient_cc_to_mac, laplacian, velocity_inner
from nemflow.flow import pressure_project
from nemflow.material import (
    GinzburgLandau,
    Params,
    Quadratic,
    bulk_energy,
    chemical_potential,
    elastic_force,
    stress_divergence,
)

POTENTIALS = [GinzburgLandau(0.3), Quadratic(2.0)]


@pytest.mark.parametrize("pot", POTENTIALS, ids=["gl", "quadratic"])
def test_f_is_gradient_of_F(pot, rng):
    d = rng.normal(size=(50, 3))
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (pot.F(d + e) - pot.F(d - e)) / (2 * h)
        np.testing.assert_allclose(pot.f(d)[:, k], fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("pot", POTENTIALS, ids=["gl", "quadratic"])
def test_jacobian_matches_finite_differences(pot, rng):
    d = rng.normal(size=(20, 2))
    J = pot.jac(d)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        col = (pot.f(d + e) - pot.f(d - e)) / (2 * h)
        np.testing.assert_allclose(J[:, :, k], col, rtol=1e-6, atol=1e-6)


def test_gl_values():
    gl = GinzburgLandau(0.5)
    # F = (|d|^2 - 1)^2 / (4 eta^2): |d|^2 = 2 gives 1 / (4 * 0.25) = 1
    assert gl.F(np.array([1.0, 1.0])) == pytest.approx(1.0)
    np.testing.assert_allclose(gl.f(np.array([1.0, 1.0])), [4.0, 4.0])
    assert gl.F(np.array([0.6, 0.8])) == pytest.approx(0.0, abs=1e-15)


def test_param_validation():
    with pytest.raises(ValueError):
        Params(nu=-1.0)
    with pytest.raises(ValueError):
        Params(gamma=0.0)
    with pytest.raises(ValueError):
        Params(lam=-0.1)
    with pytest.raises(ValueError):
        GinzburgLandau(0.0)
    with pytest.raises(ValueError):
        Quadratic(-1.0)


@pytest.mark.parametrize("mode", ["dirichlet", "free_slip", "periodic"])
def test_chemical_potential_is_variation_of_energy(mode, rng):
    # dE/dd in direction w equals -(mu, w) for w with zero trace
    g = Grid(10, 8, 1.0, 0.9, mode)
    pot = GinzburgLandau(0.4)
    b = BoundaryData.constant(g, [0.6, 0.8]) if mode == "dirichlet" else None
    d = 0.9 + 0.2 * rng.normal(size=(10, 8, 2))
    w = rng.normal(size=(10, 8, 2))
    eps = 1e-6
    dE = (bulk_energy(d + eps * w, g, pot, b) - bulk_energy(d - eps * w, g, pot, b)) / (2 * eps)
    mu = chemical_potential(apply_bc(d, g, b), g, pot)
    assert dE == pytest.approx(-np.sum(mu * w) * g.cell_area, rel=1e-6)


def _exact_force():
    x, y = sy.symbols("x y")
    a = sy.pi * (x / 2 + y / 3) + sy.sin(sy.pi * x) * sy.sin(sy.pi * y) / 4
    rho = 1 + sy.sin(sy.pi * x) * sy.sin(sy.pi * y) / 5
    d = [rho * sy.cos(a), rho * sy.sin(a)]
    eta = sy.Rational(1, 2)
    s = d[0] ** 2 + d[1] ** 2 - 1
    mu = [sy.diff(c, x, 2) + sy.diff(c, y, 2) - s * c / eta**2 for c in d]
    fx = -sum(sy.diff(c, x) * m for c, m in zip(d, mu))
    fy = -sum(sy.diff(c, y) * m for c, m in zip(d, mu))
    lam = lambda e: sy.lambdify((x, y), e, "numpy")  # noqa: E731
    return lam(d[0]), lam(d[1]), lam(fx), lam(fy)


def test_elastic_force_second_order_in_interior():
    d0, d1, fx, fy = _exact_force()
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n, 1.0, 1.0, "dirichlet")
        fn = lambda X, Y: np.stack([d0(X, Y), d1(X, Y)], -1)  # noqa: E731
        b = BoundaryData.from_function(g, fn)
        X, Y = g.cell_coords()
        F = elastic_force(fn(X, Y), g, Params(potential=GinzburgLandau(0.5)), b)
        Xu, Yu = g.u_coords()
        # interior faces away from the wall layer, where the ghost stencil is O(1)
        sl = (slice(n // 4, 3 * n // 4), slice(n // 4, 3 * n // 4))
        errs.append(np.max(np.abs(F.u[sl] - fx(Xu, Yu)[sl])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_elastic_force_differs_from_stress_divergence_by_a_gradient():
    # -lam (grad d)^T (Lap d - f) and -lam div(grad d . grad d) differ by a
    # gradient, so their projections agree up to discretization error
    errs = []
    for n in (32, 64, 128):
        g = Grid(n, n, 2 * np.pi, 2 * np.pi, "periodic")
        X, Y = g.cell_coords()
        a = np.sin(X) * np.cos(Y) + 0.5 * np.cos(2 * X + Y) + 0.3 * np.sin(X - 2 * Y)
        d = np.stack([np.cos(a), np.sin(a)], -1)
        P1 = pressure_project(elastic_force(d, g, Params(potential=GinzburgLandau(1.0))), 1.0)[0]
        P2 = pressure_project(stress_divergence(d, g) * -1.0, 1.0)[0]
        diff = P1 - P2
        errs.append(np.sqrt(velocity_inner(diff, diff) / velocity_inner(P1, P1)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)
    assert errs[-1] < 0.02


def test_force_vanishes_for_constant_director():
    g = Grid(8, 8, 1.0, 1.0, "free_slip")
    d = np.tile([0.6, 0.8], (8, 8, 1))
    F = elastic_force(d, g, Params(potential=GinzburgLandau(0.2)))
    assert F.max_abs() == 0.0


def test_lap_of_padded_constant_is_zero():
    g = Grid(6, 6, 1.0, 1.0, "dirichlet")
    b = BoundaryData.constant(g, [1.0, 0.0])
    P = apply_bc(np.tile([1.0, 0.0], (6, 6, 1)), g, b)
    assert np.max(np.abs(laplacian(P, g))) == 0.0
    assert gradient_cc_to_mac(np.ones((6, 6)), g).max_abs() == 0.0

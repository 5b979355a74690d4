import numpy as np
import pytest
import scipy.sparse.linalg as spla

from nemflow.grid import Grid
from nemflow.linalg import (
    LinearSolveConfig,
    helmholtz_solver,
    laplacian_matrix,
    poisson_solver,
    second_difference,
)

GRIDS = [Grid(12, 9, 1.0, 0.7, "dirichlet"), Grid(10, 14, 1.3, 1.0, "free_slip"), Grid(16, 12, 2.0, 1.5, "periodic")]


def test_second_difference_symbols():
    # eigenvalues of the 1D operators are known in closed form
    n, h = 8, 0.125
    k = np.arange(1, n + 1)
    ev = np.sort(np.linalg.eigvalsh(second_difference(n, h, "cell_odd").toarray()))
    exact = np.sort(-(4 / h**2) * np.sin(k * np.pi / (2 * n)) ** 2)
    np.testing.assert_allclose(ev, exact, rtol=1e-12)
    ev = np.sort(np.linalg.eigvalsh(second_difference(n, h, "cell_even").toarray()))
    exact = np.sort(-(4 / h**2) * np.sin((k - 1) * np.pi / (2 * n)) ** 2)
    np.testing.assert_allclose(ev, exact, atol=1e-10)
    ev = np.sort(np.linalg.eigvalsh(second_difference(n, h, "periodic").toarray()))
    exact = np.sort(-(4 / h**2) * np.sin((k - 1) * np.pi / n) ** 2)
    np.testing.assert_allclose(ev, exact, atol=1e-10)


@pytest.mark.parametrize("grid", GRIDS, ids=lambda g: g.bc_mode)
@pytest.mark.parametrize("comp", ["u", "v", "director"])
@pytest.mark.parametrize("method", ["direct", "cg"])
def test_helmholtz_residual(grid, comp, method, rng):
    cfg = LinearSolveConfig(rel_tol=1e-12, method=method)
    A = laplacian_matrix(grid, comp)
    coeff = 0.013
    b = rng.normal(size=A.shape[0])
    x = helmholtz_solver(grid, comp, coeff, cfg).solve(b)
    r = b - (x - coeff * (A @ x))
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("grid", GRIDS, ids=lambda g: g.bc_mode)
def test_poisson_gauge_and_residual(grid, rng):
    A = laplacian_matrix(grid, "pressure")
    b = rng.normal(size=A.shape[0])
    b -= b.mean()
    x = poisson_solver(grid).solve(b)
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)
    # independent oracle: least-squares solution, compared modulo constants
    ref = spla.lsqr(A, b, atol=1e-14, btol=1e-14, iter_lim=20000)[0]
    np.testing.assert_allclose(x - x.mean(), ref - ref.mean(), atol=1e-8)


def test_solver_cache_reused():
    g = GRIDS[0]
    a = helmholtz_solver(g, "u", 0.01, LinearSolveConfig())
    b = helmholtz_solver(g, "u", 0.01, LinearSolveConfig())
    assert a is b


def test_config_validation():
    with pytest.raises(ValueError):
        LinearSolveConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        LinearSolveConfig(method="jacobi")
    with pytest.raises(ValueError):
        LinearSolveConfig(max_iterations=0)

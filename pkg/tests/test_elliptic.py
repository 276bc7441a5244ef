import math

import numpy as np
import pytest
from scipy.special import spherical_jn
from scipy.optimize import brentq

from rvmstab.elliptic import MeridianGrid, solve_helmholtz_m1, solve_poisson_dirichlet
from rvmstab.errors import SolverError
from rvmstab.geometry import Domain
from rvmstab.operators import build_basis

# first zero of the spherical Bessel function j_1, independent of the grid code
J1_ZERO = brentq(lambda x: spherical_jn(1, x), 4.0, 5.0)


def _ball_errors(n):
    g = MeridianGrid(Domain.ball(1.0), n)
    r, z = g.r_interior, g.z_interior
    u = g.solve(np.ones(g.n_interior), "poisson")
    A = g.solve(10 * r, "m1")
    return (np.abs(u - (1 - r * r - z * z) / 6).max(),
            np.abs(A - r * (1 - r * r - z * z)).max())


def test_manufactured_solutions_converge_second_order():
    # -Lap u = 1 on the unit ball: u = (1 - |x|^2)/6
    # (-Lap + 1/r^2) A = 10 r: A = r (1 - |x|^2)
    e16, e32 = _ball_errors(16), _ball_errors(32)
    for a, b in zip(e16, e32):
        assert a / b > 3.0
    assert e32[0] < 3e-4 and e32[1] < 5e-3


def test_ball_eigenvalues_approach_bessel_zeros():
    prev = None
    for n in (16, 32):
        g = MeridianGrid(Domain.ball(1.0), n)
        lp = g.eigenpairs("poisson", 1)[0][0]
        lm = g.eigenpairs("m1", 1)[0][0]
        err = (abs(lp - math.pi ** 2), abs(lm - J1_ZERO ** 2))
        if prev is not None:
            assert err[0] < prev[0] / 3 and err[1] < prev[1] / 3
        prev = err
    assert prev[0] < 0.03 and prev[1] < 0.06


def test_symmetric_form_and_positivity(torus_grid):
    for kind in ("poisson", "m1"):
        S = torus_grid.symmetric_operator(kind)
        assert abs(S - S.T).max() == 0.0
        x = np.random.default_rng(3).normal(size=torus_grid.n_interior)
        assert x @ (S @ x) > 0


def test_inverse_is_nonnegative(torus_grid):
    u = torus_grid.solve(np.ones(torus_grid.n_interior), "poisson")
    assert np.all(u > 0)
    assert torus_grid.sup_norm_of_inverse("poisson") == pytest.approx(u.max())


def test_basis_is_orthonormal(torus_grid):
    for kind in ("laplacian-dirichlet", "m1-dirichlet"):
        B = build_basis(torus_grid, 12, kind)
        np.testing.assert_allclose(B.gram(), np.eye(12), atol=1e-10)
        assert np.all(np.diff(B.eigenvalues) >= -1e-12)


def test_m1_spectrum_above_laplacian(torus_grid):
    lp = torus_grid.eigenpairs("poisson", 4)[0]
    lm = torus_grid.eigenpairs("m1", 4)[0]
    # 1/r^2 >= 1/b^2 pointwise shifts every eigenvalue up by at least that much
    assert np.all(lm >= lp + 1 / torus_grid.domain.b ** 2 - 1e-9)


def test_full_grid_wrappers(torus_grid):
    rhs = np.ones(torus_grid.n_interior)
    full = solve_poisson_dirichlet(torus_grid, rhs)
    assert full.shape == torus_grid.shape
    assert np.all(full[~torus_grid.mask] == 0)
    with pytest.raises(ValueError):
        solve_helmholtz_m1(torus_grid, rhs, -1.0)


def test_too_many_eigenpairs():
    g = MeridianGrid(Domain.ball(1.0), 6)
    with pytest.raises(SolverError):
        g.eigenpairs("poisson", g.n_interior + 1)


def test_nonfinite_rhs(torus_grid):
    rhs = np.ones(torus_grid.n_interior)
    rhs[3] = np.nan
    with pytest.raises(SolverError):
        torus_grid.solve(rhs)
